#include <cmath>
#include <numbers>

#include "circlesnake/encoding.hpp"
#include "circlesnake/error.hpp"
#include "circlesnake/pipeline.hpp"

namespace circlesnake::pipeline {

torch::Tensor images_to_tensor(std::span<const data::Sample> samples) {
  if (samples.empty()) throw InvalidInput("images_to_tensor: empty batch");
  const int h = samples[0].image.height, w = samples[0].image.width;
  torch::Tensor out = torch::empty({static_cast<long>(samples.size()), 3, h, w}, torch::kFloat32);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const data::Image& img = samples[i].image;
    if (img.height != h || img.width != w) {
      throw InvalidInput("images_to_tensor: sample '" + samples[i].id + "' is " +
                         std::to_string(img.height) + "x" + std::to_string(img.width) +
                         ", batch is " + std::to_string(h) + "x" + std::to_string(w));
    }
    const torch::Tensor hwc = torch::from_blob(const_cast<float*>(img.pixels.data()), {h, w, 3},
                                               torch::kFloat32);
    out[static_cast<long>(i)].copy_(hwc.permute({2, 0, 1}));
  }
  return out;
}

TrainBatch make_train_batch(std::span<const data::Sample> samples, const ModelConfig& model,
                            const JitterOptions& jitter, std::mt19937_64& rng) {
  TrainBatch batch;
  batch.images = images_to_tensor(samples);
  const int h = samples[0].image.height, w = samples[0].image.width;

  std::vector<encoding::TargetMaps> maps;
  std::vector<double> proposals;
  std::vector<std::int64_t> owner;
  std::vector<geometry::Contour> targets;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    maps.push_back(encoding::encode_targets(samples[i].instances, h, w, model.r_down, model.num_classes));
    for (const auto& inst : samples[i].instances) {
      const geometry::Circle& c = inst.circle;
      if (c.cx < 0.0 || c.cy < 0.0 || c.cx >= w || c.cy >= h) continue;  // not encoded either
      const double angle = 2.0 * std::numbers::pi * unit(rng);
      const double shift = jitter.center * c.r * unit(rng);
      const double scale = 1.0 + jitter.radius * (2.0 * unit(rng) - 1.0);
      const geometry::Circle p{c.cx + shift * std::cos(angle), c.cy + shift * std::sin(angle),
                               c.r * scale};
      proposals.insert(proposals.end(), {p.cx, p.cy, p.r});
      owner.push_back(static_cast<std::int64_t>(i));
      targets.push_back(
          geometry::sample_boundary_contour(inst.boundary, model.vertices, {p.cx, p.cy - p.r}));
    }
  }
  batch.targets = detector::stack_targets(maps);
  const long k = static_cast<long>(owner.size());
  batch.proposals = torch::tensor(proposals, torch::kFloat64).reshape({k, 3}).to(torch::kFloat32);
  batch.batch_index = torch::tensor(owner, torch::kInt64).reshape({k});
  batch.gt_contours = k > 0 ? snake::contours_to_tensor(targets)
                            : torch::zeros({0, model.vertices, 2}, torch::kFloat32);
  return batch;
}

}  // namespace circlesnake::pipeline
