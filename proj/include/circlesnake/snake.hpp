#pragma once

// Contour deformation from circle proposals: ring convolution, the graph
// network over contour vertices, and the iterative deformation loss.

#include <torch/torch.h>

#include <functional>
#include <string>
#include <vector>

#include "circlesnake/decode.hpp"
#include "circlesnake/geometry.hpp"

namespace circlesnake::snake {

inline constexpr int kRingWindow = 9;
inline constexpr int kDefaultVertices = 128;

/// Periodic 1-D correlation along the last axis:
/// out[b][o][i] = bias[o] + sum_c sum_j x[b][c][(i + j) mod N] * w[o][c][j + r].
/// signal: B×D×N, weight: D'×D×window (odd). Throws InvalidInput if N < window.
torch::Tensor circular_conv(const torch::Tensor& signal, const torch::Tensor& weight,
                            const torch::Tensor& bias = {});

class CircularConv1dImpl : public torch::nn::Module {
 public:
  CircularConv1dImpl(int in_channels, int out_channels, int window = kRingWindow);
  torch::Tensor forward(const torch::Tensor& signal);

  torch::Tensor weight, bias;
};
TORCH_MODULE(CircularConv1d);

geometry::Contour propose_contour(const detector::Detection& detection,
                                  int vertices = kDefaultVertices);

/// Bilinear samples of a B×D×h×w feature grid at contour vertices given in
/// image pixels. Grid cell (i, j) is centered at pixel ((j + 0.5) r, (i + 0.5) r);
/// positions outside the grid clamp to the border.
/// vertices: K×N×2 (x, y); batch_index: K int64. Returns K×D×N.
torch::Tensor sample_vertex_features(const torch::Tensor& features, const torch::Tensor& vertices,
                                     const torch::Tensor& batch_index, int r_down);

enum class CoordMode { normalized, raw };

CoordMode coord_mode_from_string(const std::string& s);
std::string to_string(CoordMode mode);

/// Appends two coordinate channels: ((x - cx) / r, (y - cy) / r) of the
/// proposal circle in normalized mode, pixel coordinates in raw mode.
/// circles: K×3 (cx, cy, r). Returns K×(D+2)×N.
torch::Tensor append_coordinates(const torch::Tensor& sampled, const torch::Tensor& vertices,
                                 const torch::Tensor& circles, CoordMode mode);

struct GcnOptions {
  int in_channels = 66;
  int width = 128;
  int fusion_channels = 256;
  int blocks = 8;
};

/// Ring-convolution backbone with residual blocks, global max-pooled fusion
/// and a three-layer pointwise predictor. Input K×C×N, output K×2×N.
class GcnImpl : public torch::nn::Module {
 public:
  explicit GcnImpl(const GcnOptions& options);
  torch::Tensor forward(const torch::Tensor& x);
  /// Zero the last predictor layer so the network outputs zero offsets.
  void zero_output_();

 private:
  GcnOptions options_;
  std::vector<CircularConv1d> convs_;
  std::vector<torch::nn::BatchNorm1d> norms_;
  torch::nn::Conv1d fusion_{nullptr};
  torch::nn::Sequential predictor_{nullptr};
};
TORCH_MODULE(Gcn);

struct SnakeOptions {
  int feature_channels = 64;
  int r_down = 4;
  int vertices = kDefaultVertices;
  int iterations = 3;
  int gcn_width = 128;
  int fusion_channels = 256;
  bool share_weights = false;
  CoordMode coord_mode = CoordMode::normalized;
};

/// Per-vertex offsets for one iteration from the K×(D+2)×N vertex features;
/// returns K×2×N in the coordinate units of the chosen mode.
using OffsetPredictor = std::function<torch::Tensor(int iteration, const torch::Tensor& features)>;

/// Iterative deformation. circles: K×3 proposals, batch_index: K.
/// Returns the K×N×2 contour after each iteration. Vertex positions are
/// detached between iterations; gradients reach the predictor and the
/// feature grid. Offsets are scaled by the proposal radius in normalized mode.
std::vector<torch::Tensor> deform(const torch::Tensor& features, const torch::Tensor& circles,
                                  const torch::Tensor& batch_index, const SnakeOptions& options,
                                  const OffsetPredictor& predict);

class SnakeImpl : public torch::nn::Module {
 public:
  explicit SnakeImpl(const SnakeOptions& options);
  std::vector<torch::Tensor> forward(const torch::Tensor& features, const torch::Tensor& circles,
                                     const torch::Tensor& batch_index);
  const SnakeOptions& options() const { return options_; }
  Gcn& gcn(int iteration);

 private:
  SnakeOptions options_;
  std::vector<Gcn> gcns_;
};
TORCH_MODULE(Snake);

/// K×N×2 tensor of circle contours (same vertex order as sample_circle_contour).
torch::Tensor circle_contours(const torch::Tensor& circles, int vertices);

torch::Tensor contours_to_tensor(const std::vector<geometry::Contour>& contours,
                                 torch::Dtype dtype = torch::kFloat32);
std::vector<geometry::Contour> tensor_to_contours(const torch::Tensor& contours);

enum class DeformationLoss { smooth_l1, l1 };

DeformationLoss deformation_loss_from_string(const std::string& s);
std::string to_string(DeformationLoss kind);

/// Per-vertex penalty summed over both coordinates, averaged over vertices
/// and instances. Smooth L1 switches to linear at 1 pixel.
torch::Tensor deformation_loss(const torch::Tensor& contour, const torch::Tensor& target,
                               DeformationLoss kind = DeformationLoss::smooth_l1);

/// Sum over iterations.
torch::Tensor deformation_loss(const std::vector<torch::Tensor>& contours,
                               const torch::Tensor& target,
                               DeformationLoss kind = DeformationLoss::smooth_l1);

}  // namespace circlesnake::snake
