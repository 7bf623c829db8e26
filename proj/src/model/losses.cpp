#include <vector>

#include "circlesnake/detector.hpp"
#include "circlesnake/error.hpp"

namespace circlesnake::detector {

namespace {

constexpr double kFocalAlpha = 2.0;
constexpr double kFocalBeta = 4.0;
constexpr double kProbClamp = 1e-4;

torch::Tensor gather_at(const torch::Tensor& map, const PositiveBatch& pos) {
  // map: B×K×h×w -> P×K
  return map.index({pos.batch, torch::indexing::Slice(), pos.row, pos.col});
}

}  // namespace

TargetBatch stack_targets(std::span<const encoding::TargetMaps> targets, torch::Dtype dtype) {
  if (targets.empty()) throw InvalidInput("stack_targets: empty batch");
  const int c = targets[0].heatmap.channels(), h = targets[0].heatmap.height(),
            w = targets[0].heatmap.width();
  torch::Tensor heat = torch::empty({static_cast<long>(targets.size()), c, h, w}, torch::kFloat64);
  std::vector<std::int64_t> b, r, k;
  std::vector<double> rad, off;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const auto& t = targets[i];
    if (t.heatmap.channels() != c || t.heatmap.height() != h || t.heatmap.width() != w) {
      throw InvalidInput("stack_targets: target grids differ in shape");
    }
    std::copy_n(t.heatmap.data().data(), t.heatmap.size(),
                heat.data_ptr<double>() + i * t.heatmap.size());
    for (const auto& p : t.positives) {
      b.push_back(static_cast<std::int64_t>(i));
      r.push_back(p.row);
      k.push_back(p.col);
      rad.push_back(p.radius);
      off.push_back(p.dx);
      off.push_back(p.dy);
    }
  }
  auto ints = [](const std::vector<std::int64_t>& v) {
    return torch::tensor(v, torch::kInt64).reshape({static_cast<long>(v.size())});
  };
  TargetBatch out;
  out.heatmap = heat.to(dtype);
  out.positives.batch = ints(b);
  out.positives.row = ints(r);
  out.positives.col = ints(k);
  out.positives.radius =
      torch::tensor(rad, torch::kFloat64).reshape({static_cast<long>(rad.size())}).to(dtype);
  out.positives.offset =
      torch::tensor(off, torch::kFloat64).reshape({static_cast<long>(rad.size()), 2}).to(dtype);
  return out;
}

LossTerm focal_loss(const torch::Tensor& pred, const torch::Tensor& target) {
  if (pred.sizes() != target.sizes()) throw InvalidInput("focal_loss: shape mismatch");
  const torch::Tensor p = pred.clamp(kProbClamp, 1.0 - kProbClamp);
  const torch::Tensor is_pos = target.eq(1.0);
  const torch::Tensor pos_term = torch::pow(1.0 - p, kFocalAlpha) * torch::log(p);
  const torch::Tensor neg_term =
      torch::pow(1.0 - target, kFocalBeta) * torch::pow(p, kFocalAlpha) * torch::log(1.0 - p);
  const torch::Tensor sum = torch::where(is_pos, pos_term, neg_term).sum();
  const std::int64_t n = is_pos.sum().item<std::int64_t>();
  return {-sum / static_cast<double>(std::max<std::int64_t>(n, 1)), n == 0};
}

LossTerm radius_loss(const torch::Tensor& pred, const PositiveBatch& positives) {
  if (positives.size() == 0) return {pred.sum() * 0.0, true};
  const torch::Tensor at = gather_at(pred, positives).squeeze(1);
  return {(at - positives.radius).abs().mean(), false};
}

LossTerm offset_loss(const torch::Tensor& pred, const PositiveBatch& positives) {
  if (positives.size() == 0) return {pred.sum() * 0.0, true};
  return {(gather_at(pred, positives) - positives.offset).abs().mean(), false};
}

torch::Tensor combine_detection_terms(const torch::Tensor& focal, const torch::Tensor& radius,
                                      const torch::Tensor& offset) {
  return focal + kRadiusWeight * radius + kOffsetWeight * offset;
}

DetectionLoss detection_loss(const HeadOutputs& out, const TargetBatch& targets) {
  const LossTerm k = focal_loss(out.heatmap, targets.heatmap);
  const LossTerm r = radius_loss(out.radius, targets.positives);
  const LossTerm o = offset_loss(out.offset, targets.positives);
  DetectionLoss loss;
  loss.focal = k.value;
  loss.radius = r.value;
  loss.offset = o.value;
  loss.total = combine_detection_terms(k.value, r.value, o.value);
  loss.no_positives = k.no_positives;
  return loss;
}

}  // namespace circlesnake::detector
