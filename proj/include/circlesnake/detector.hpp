#pragma once

// Center-point circle detector: a small convolutional feature extractor,
// heatmap / radius / offset heads, and the detection losses.

#include <torch/torch.h>

#include <span>
#include <vector>

#include "circlesnake/decode.hpp"
#include "circlesnake/encoding.hpp"
#include "circlesnake/grid.hpp"

namespace circlesnake::detector {

inline constexpr double kHeatmapPriorBias = -2.19;  // sigmoid ~ 0.1 at initialization

struct BackboneOptions {
  int width = 16;             // channels of the first stage; doubles per stage
  int convs_per_stage = 2;
  int feature_channels = 64;  // D of the output grid
};

/// Three stride-2 stages (H/2, H/4, H/8), dilated context at H/8, then a
/// bilinear upsample fused with the H/4 stage output. Output: B×D×(H/4)×(W/4).
class BackboneImpl : public torch::nn::Module {
 public:
  explicit BackboneImpl(const BackboneOptions& options);
  torch::Tensor forward(const torch::Tensor& images);  // B×3×H×W in [0, 1]
  int feature_channels() const { return options_.feature_channels; }

 private:
  BackboneOptions options_;
  torch::nn::Sequential stage1_{nullptr}, stage2_{nullptr}, stage3_{nullptr};
  torch::nn::Sequential context_{nullptr}, fuse_{nullptr};
};
TORCH_MODULE(Backbone);

struct HeadOutputs {
  torch::Tensor heatmap;  // B×C×h×w, sigmoid probabilities
  torch::Tensor radius;   // B×1×h×w, downsampled units
  torch::Tensor offset;   // B×2×h×w, (dx, dy)
};

/// Each head: 3×3 conv, ReLU, 1×1 conv.
class HeadsImpl : public torch::nn::Module {
 public:
  HeadsImpl(int in_channels, int head_channels, int num_classes);
  HeadOutputs forward(const torch::Tensor& features);
  void zero_();

 private:
  torch::nn::Sequential heatmap_{nullptr}, radius_{nullptr}, offset_{nullptr};
};
TORCH_MODULE(Heads);

// ---------------------------------------------------------------------------
// Losses

/// Positive cells of a batch of targets, flattened across images.
struct PositiveBatch {
  torch::Tensor batch;   // K int64
  torch::Tensor row;     // K int64
  torch::Tensor col;     // K int64
  torch::Tensor radius;  // K, downsampled units
  torch::Tensor offset;  // K×2
  std::int64_t size() const { return batch.numel(); }
};

/// Dense targets stacked to B×C×h×w plus the positive list.
struct TargetBatch {
  torch::Tensor heatmap;
  PositiveBatch positives;
};

TargetBatch stack_targets(std::span<const encoding::TargetMaps> targets,
                          torch::Dtype dtype = torch::kFloat32);

struct LossTerm {
  torch::Tensor value;
  bool no_positives = false;
};

/// Penalty-reduced focal loss (alpha 2, beta 4), summed and divided by the
/// number of cells equal to 1 (at least 1). Predictions are clamped to
/// [1e-4, 1 - 1e-4] inside the logarithms.
LossTerm focal_loss(const torch::Tensor& pred, const torch::Tensor& target);

/// Mean absolute error at the positive cells.
LossTerm radius_loss(const torch::Tensor& pred, const PositiveBatch& positives);
LossTerm offset_loss(const torch::Tensor& pred, const PositiveBatch& positives);

inline constexpr double kRadiusWeight = 0.1;
inline constexpr double kOffsetWeight = 1.0;

struct DetectionLoss {
  torch::Tensor total;
  torch::Tensor focal, radius, offset;
  bool no_positives = false;
};

torch::Tensor combine_detection_terms(const torch::Tensor& focal, const torch::Tensor& radius,
                                      const torch::Tensor& offset);
DetectionLoss detection_loss(const HeadOutputs& out, const TargetBatch& targets);

// ---------------------------------------------------------------------------
// Decoding from tensors

/// C×h×w tensor (any floating dtype) to a double grid.
Grid3<double> to_grid(const torch::Tensor& chw);

/// Decodes image `index` of a batch of head outputs.
DecodeResult decode(const HeadOutputs& out, int index, int n, int r_down,
                    double score_threshold = 0.0);

}  // namespace circlesnake::detector
