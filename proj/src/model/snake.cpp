#include "circlesnake/snake.hpp"

#include <numbers>

#include "circlesnake/error.hpp"

namespace circlesnake::snake {

namespace nn = torch::nn;
namespace F = torch::nn::functional;

geometry::Contour propose_contour(const detector::Detection& detection, int vertices) {
  return geometry::sample_circle_contour(detection.circle, vertices);
}

torch::Tensor sample_vertex_features(const torch::Tensor& features, const torch::Tensor& vertices,
                                     const torch::Tensor& batch_index, int r_down) {
  if (features.dim() != 4) throw InvalidInput("sample_vertex_features: expected B×D×h×w features");
  if (vertices.dim() != 3 || vertices.size(2) != 2) {
    throw InvalidInput("sample_vertex_features: expected K×N×2 vertices");
  }
  if (batch_index.numel() != vertices.size(0)) {
    throw InvalidInput("sample_vertex_features: one batch index per contour is required");
  }
  if (r_down < 1) throw InvalidInput("sample_vertex_features: r_down must be positive");
  const std::int64_t k = vertices.size(0), n = vertices.size(1), d = features.size(1);
  const double h = static_cast<double>(features.size(2)), w = static_cast<double>(features.size(3));
  torch::Tensor out = torch::zeros({k, d, n}, features.options());
  if (k == 0) return out;

  // align_corners = false puts grid cell centers at (index + 0.5) / size.
  const torch::Tensor v = vertices.to(features.scalar_type());
  const torch::Tensor gx = v.select(2, 0) / r_down * (2.0 / w) - 1.0;
  const torch::Tensor gy = v.select(2, 1) / r_down * (2.0 / h) - 1.0;
  const torch::Tensor grid = torch::stack({gx, gy}, 2);  // K×N×2
  const torch::Tensor bi = batch_index.to(torch::kInt64);
  const auto options = F::GridSampleFuncOptions()
                           .mode(torch::kBilinear)
                           .padding_mode(torch::kBorder)
                           .align_corners(false);
  for (std::int64_t b = 0; b < features.size(0); ++b) {
    const torch::Tensor rows = torch::nonzero(bi == b).squeeze(1);
    if (rows.numel() == 0) continue;
    const torch::Tensor g = grid.index_select(0, rows).unsqueeze(0);          // 1×k_b×N×2
    const torch::Tensor s = F::grid_sample(features.narrow(0, b, 1), g, options);  // 1×D×k_b×N
    out = out.index_copy(0, rows, s.squeeze(0).permute({1, 0, 2}));
  }
  return out;
}

CoordMode coord_mode_from_string(const std::string& s) {
  if (s == "normalized") return CoordMode::normalized;
  if (s == "raw") return CoordMode::raw;
  throw InvalidInput("unknown coordinate mode '" + s + "' (expected normalized or raw)");
}

std::string to_string(CoordMode mode) { return mode == CoordMode::raw ? "raw" : "normalized"; }

torch::Tensor append_coordinates(const torch::Tensor& sampled, const torch::Tensor& vertices,
                                 const torch::Tensor& circles, CoordMode mode) {
  torch::Tensor xy = vertices.to(sampled.scalar_type());  // K×N×2
  if (mode == CoordMode::normalized) {
    const torch::Tensor c = circles.to(sampled.scalar_type());
    const torch::Tensor center = c.narrow(1, 0, 2).unsqueeze(1);
    const torch::Tensor radius = c.narrow(1, 2, 1).unsqueeze(1);
    xy = (xy - center) / radius;
  }
  return torch::cat({sampled, xy.permute({0, 2, 1})}, 1);
}

GcnImpl::GcnImpl(const GcnOptions& options) : options_(options) {
  if (options.in_channels < 1 || options.width < 1 || options.fusion_channels < 1 ||
      options.blocks < 1) {
    throw InvalidInput("gcn: channel counts and block count must be positive");
  }
  for (int b = 0; b < options.blocks; ++b) {
    const int in = b == 0 ? options.in_channels : options.width;
    convs_.push_back(register_module("conv" + std::to_string(b), CircularConv1d(in, options.width)));
    norms_.push_back(register_module("norm" + std::to_string(b), nn::BatchNorm1d(options.width)));
  }
  const int stacked = options.width * options.blocks;
  fusion_ = register_module("fusion", nn::Conv1d(nn::Conv1dOptions(stacked, options.fusion_channels, 1)));
  predictor_ = register_module(
      "predictor",
      nn::Sequential(nn::Conv1d(nn::Conv1dOptions(stacked + options.fusion_channels, 256, 1)),
                     nn::ReLU(nn::ReLUOptions(true)), nn::Conv1d(nn::Conv1dOptions(256, 64, 1)),
                     nn::ReLU(nn::ReLUOptions(true)), nn::Conv1d(nn::Conv1dOptions(64, 2, 1))));
}

torch::Tensor GcnImpl::forward(const torch::Tensor& x) {
  std::vector<torch::Tensor> states;
  torch::Tensor h = x;
  for (std::size_t b = 0; b < convs_.size(); ++b) {
    const torch::Tensor y = torch::relu(norms_[b]->forward(convs_[b]->forward(h)));
    h = b == 0 ? y : h + y;
    states.push_back(h);
  }
  const torch::Tensor stacked = torch::cat(states, 1);
  const torch::Tensor global = std::get<0>(fusion_->forward(stacked).max(2, true));
  return predictor_->forward(torch::cat({stacked, global.expand({-1, -1, x.size(2)})}, 1));
}

void GcnImpl::zero_output_() {
  torch::NoGradGuard guard;
  auto last = predictor_[4]->as<nn::Conv1d>();
  last->weight.zero_();
  last->bias.zero_();
}

torch::Tensor circle_contours(const torch::Tensor& circles, int vertices) {
  if (vertices < 3) throw InvalidInput("circle_contours: need at least 3 vertices");
  const torch::Tensor c = circles.to(torch::kFloat64);
  const torch::Tensor theta =
      torch::arange(vertices, torch::kFloat64) * (2.0 * std::numbers::pi / vertices);
  const torch::Tensor cx = c.select(1, 0).unsqueeze(1), cy = c.select(1, 1).unsqueeze(1);
  const torch::Tensor r = c.select(1, 2).unsqueeze(1);
  return torch::stack({cx + r * torch::sin(theta), cy - r * torch::cos(theta)}, 2)
      .to(circles.scalar_type());
}

std::vector<torch::Tensor> deform(const torch::Tensor& features, const torch::Tensor& circles,
                                  const torch::Tensor& batch_index, const SnakeOptions& options,
                                  const OffsetPredictor& predict) {
  if (options.iterations < 1) throw InvalidInput("deform: iterations must be at least 1");
  const torch::Tensor proposals = circles.detach().to(features.scalar_type());
  torch::Tensor contour = circle_contours(proposals, options.vertices);
  const std::int64_t k = proposals.size(0);
  const torch::Tensor scale = options.coord_mode == CoordMode::normalized
                                  ? proposals.narrow(1, 2, 1).view({k, 1, 1})
                                  : torch::ones({k, 1, 1}, features.options());
  std::vector<torch::Tensor> out;
  for (int t = 0; t < options.iterations; ++t) {
    const torch::Tensor base = contour.detach();
    const torch::Tensor sampled =
        sample_vertex_features(features, base, batch_index, options.r_down);
    const torch::Tensor vf = append_coordinates(sampled, base, proposals, options.coord_mode);
    if (k == 0) {
      out.push_back(base);
      continue;
    }
    const torch::Tensor offsets = predict(t, vf);  // K×2×N
    if (offsets.dim() != 3 || offsets.size(0) != k || offsets.size(1) != 2 ||
        offsets.size(2) != options.vertices) {
      throw InvalidInput("deform: offset predictor must return K×2×N");
    }
    contour = base + offsets.permute({0, 2, 1}) * scale;
    out.push_back(contour);
  }
  return out;
}

SnakeImpl::SnakeImpl(const SnakeOptions& options) : options_(options) {
  if (options.vertices < kRingWindow) {
    throw InvalidInput("snake: at least " + std::to_string(kRingWindow) + " vertices are required");
  }
  if (options.iterations < 1) throw InvalidInput("snake: iterations must be at least 1");
  GcnOptions g;
  g.in_channels = options.feature_channels + 2;
  g.width = options.gcn_width;
  g.fusion_channels = options.fusion_channels;
  const int sets = options.share_weights ? 1 : options.iterations;
  for (int i = 0; i < sets; ++i) gcns_.push_back(register_module("gcn" + std::to_string(i), Gcn(g)));
}

Gcn& SnakeImpl::gcn(int iteration) {
  return gcns_[options_.share_weights ? 0 : static_cast<std::size_t>(iteration)];
}

std::vector<torch::Tensor> SnakeImpl::forward(const torch::Tensor& features,
                                              const torch::Tensor& circles,
                                              const torch::Tensor& batch_index) {
  return deform(features, circles, batch_index, options_,
                [this](int t, const torch::Tensor& vf) { return gcn(t)->forward(vf); });
}

torch::Tensor contours_to_tensor(const std::vector<geometry::Contour>& contours, torch::Dtype dtype) {
  const std::int64_t k = static_cast<std::int64_t>(contours.size());
  const std::int64_t n = k ? static_cast<std::int64_t>(contours[0].size()) : 0;
  torch::Tensor t = torch::empty({k, n, 2}, torch::kFloat64);
  double* p = t.data_ptr<double>();
  for (const auto& c : contours) {
    if (static_cast<std::int64_t>(c.size()) != n) {
      throw InvalidInput("contours_to_tensor: contours differ in vertex count");
    }
    for (const auto& v : c) {
      *p++ = v.x;
      *p++ = v.y;
    }
  }
  return t.to(dtype);
}

std::vector<geometry::Contour> tensor_to_contours(const torch::Tensor& contours) {
  const torch::Tensor t = contours.detach().to(torch::kCPU, torch::kFloat64).contiguous();
  std::vector<geometry::Contour> out;
  const double* p = t.data_ptr<double>();
  for (std::int64_t i = 0; i < t.size(0); ++i) {
    std::vector<geometry::Point> pts(static_cast<std::size_t>(t.size(1)));
    for (auto& q : pts) {
      q.x = *p++;
      q.y = *p++;
    }
    out.emplace_back(std::move(pts));
  }
  return out;
}

DeformationLoss deformation_loss_from_string(const std::string& s) {
  if (s == "smooth_l1") return DeformationLoss::smooth_l1;
  if (s == "l1") return DeformationLoss::l1;
  throw InvalidInput("unknown deformation loss '" + s + "' (expected smooth_l1 or l1)");
}

std::string to_string(DeformationLoss kind) {
  return kind == DeformationLoss::l1 ? "l1" : "smooth_l1";
}

torch::Tensor deformation_loss(const torch::Tensor& contour, const torch::Tensor& target,
                               DeformationLoss kind) {
  if (contour.sizes() != target.sizes()) {
    throw InvalidInput("deformation_loss: contour and target differ in shape");
  }
  if (contour.numel() == 0) return contour.sum();
  const torch::Tensor diff = (contour - target).abs();
  const torch::Tensor per =
      kind == DeformationLoss::l1 ? diff : torch::where(diff < 1.0, 0.5 * diff * diff, diff - 0.5);
  return per.sum(2).mean();
}

torch::Tensor deformation_loss(const std::vector<torch::Tensor>& contours,
                               const torch::Tensor& target, DeformationLoss kind) {
  if (contours.empty()) throw InvalidInput("deformation_loss: no iterations");
  torch::Tensor total = deformation_loss(contours[0], target, kind);
  for (std::size_t i = 1; i < contours.size(); ++i) {
    total = total + deformation_loss(contours[i], target, kind);
  }
  return total;
}

}  // namespace circlesnake::snake
