#pragma once

// Run configuration: one JSON document with dataset, model, loss, train and
// infer sections. Unknown keys and out-of-range values are rejected before
// any compute starts.

#include <cstdint>
#include <filesystem>
#include <string>

#include "json.hpp"

namespace circlesnake::pipeline {

struct DatasetConfig {
  std::string train = "synthetic:seed=1,count=1000,size=256";
  std::string val = "synthetic:seed=2,count=50,size=256";
};

struct ModelConfig {
  int backbone_width = 16;
  int convs_per_stage = 2;
  int feature_channels = 64;
  int head_channels = 64;
  int num_classes = 1;
  int r_down = 4;
  int vertices = 128;
  int iterations = 3;
  int gcn_width = 128;
  int fusion_channels = 256;
  bool share_gcn_weights = false;
  std::string coord_mode = "normalized";  // normalized | raw
};

struct LossConfig {
  std::string deformation = "smooth_l1";  // smooth_l1 | l1
};

struct TrainConfig {
  double lr = 1e-4;
  int batch_size = 16;
  int max_epochs = 50;
  std::uint64_t seed = 0;
  std::string schedule = "joint";  // joint | two_stage
  int warmup_epochs = 0;           // detector-only epochs for two_stage
  double center_jitter = 0.1;      // proposal center shift, fraction of r
  double radius_jitter = 0.1;      // proposal radius scale in [1 - j, 1 + j]
  bool augment_rotation = true;    // random quarter turns
  int threads = 1;
  std::string output_dir = "runs/default";
};

struct InferConfig {
  double score_threshold = 0.3;
  int max_detections = 100;
};

struct RunConfig {
  DatasetConfig dataset;
  ModelConfig model;
  LossConfig loss;
  TrainConfig train;
  InferConfig infer;

  /// Throws Error(config) naming the offending field.
  void validate() const;
  /// 64-bit FNV-1a over the canonical (sorted-key) JSON dump.
  std::string hash() const;
};

nlohmann::json to_json(const RunConfig& config);
/// Missing keys take defaults; unknown keys are errors. Validates.
RunConfig config_from_json(const nlohmann::json& j);
RunConfig load_config(const std::filesystem::path& path);

}  // namespace circlesnake::pipeline
