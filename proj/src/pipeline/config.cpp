#include "circlesnake/config.hpp"

#include <fstream>
#include <set>

#include "circlesnake/checkpoint.hpp"
#include "circlesnake/error.hpp"

namespace circlesnake::pipeline {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& msg) { throw Error(ErrorCategory::config, msg); }

void require(bool ok, const std::string& field, const std::string& what) {
  if (!ok) fail(field + ": " + what);
}

/// Reads the keys of one section, rejecting unknown ones.
class SectionReader {
 public:
  SectionReader(const json& root, const std::string& name) : name_(name) {
    if (!root.contains(name)) return;
    section_ = &root.at(name);
    if (!section_->is_object()) fail(name + ": expected an object");
  }

  template <class T>
  void read(const std::string& key, T& dst) {
    known_.insert(key);
    if (!section_ || !section_->contains(key)) return;
    const json& v = section_->at(key);
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) fail(name_ + "." + key + ": expected a boolean");
      } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) fail(name_ + "." + key + ": expected an integer");
        if constexpr (std::is_unsigned_v<T>) {
          if (!v.is_number_unsigned()) fail(name_ + "." + key + ": expected a nonnegative integer");
        }
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) fail(name_ + "." + key + ": expected a number");
      } else {
        if (!v.is_string()) fail(name_ + "." + key + ": expected a string");
      }
      dst = v.get<T>();
    } catch (const json::exception& e) {
      fail(name_ + "." + key + ": " + e.what());
    }
  }

  void finish() const {
    if (!section_) return;
    for (const auto& [key, _] : section_->items()) {
      if (!known_.count(key)) fail(name_ + "." + key + ": unknown key");
    }
  }

 private:
  std::string name_;
  const json* section_ = nullptr;
  std::set<std::string> known_;
};

}  // namespace

void RunConfig::validate() const {
  require(!dataset.train.empty(), "dataset.train", "must name a dataset");
  require(!dataset.val.empty(), "dataset.val", "must name a dataset");

  const ModelConfig& m = model;
  require(m.backbone_width >= 1 && m.backbone_width <= 512, "model.backbone_width", "must be in [1, 512]");
  require(m.convs_per_stage >= 1 && m.convs_per_stage <= 8, "model.convs_per_stage", "must be in [1, 8]");
  require(m.feature_channels >= 1, "model.feature_channels", "must be positive");
  require(m.head_channels >= 1, "model.head_channels", "must be positive");
  require(m.num_classes >= 1, "model.num_classes", "must be positive");
  require(m.r_down == 4, "model.r_down", "the backbone produces stride-4 features; only 4 is supported");
  require(m.vertices >= 9 && m.vertices <= 1024, "model.vertices",
          "must be in [9, 1024] (at least the ring-convolution window)");
  require(m.iterations >= 1 && m.iterations <= 10, "model.iterations", "must be in [1, 10]");
  require(m.gcn_width >= 1, "model.gcn_width", "must be positive");
  require(m.fusion_channels >= 1, "model.fusion_channels", "must be positive");
  require(m.coord_mode == "normalized" || m.coord_mode == "raw", "model.coord_mode",
          "must be 'normalized' or 'raw'");

  require(loss.deformation == "smooth_l1" || loss.deformation == "l1", "loss.deformation",
          "must be 'smooth_l1' or 'l1'");

  const TrainConfig& t = train;
  require(t.lr > 0.0 && t.lr < 1.0, "train.lr", "must be in (0, 1)");
  require(t.batch_size >= 1, "train.batch_size", "must be positive");
  require(t.max_epochs >= 1, "train.max_epochs", "must be positive");
  require(t.schedule == "joint" || t.schedule == "two_stage", "train.schedule",
          "must be 'joint' or 'two_stage'");
  require(t.warmup_epochs >= 0 && t.warmup_epochs <= t.max_epochs, "train.warmup_epochs",
          "must be in [0, max_epochs]");
  require(t.schedule == "two_stage" || t.warmup_epochs == 0, "train.warmup_epochs",
          "only meaningful with schedule 'two_stage'");
  require(t.center_jitter >= 0.0 && t.center_jitter <= 0.5, "train.center_jitter", "must be in [0, 0.5]");
  require(t.radius_jitter >= 0.0 && t.radius_jitter < 1.0, "train.radius_jitter", "must be in [0, 1)");
  require(t.threads >= 1, "train.threads", "must be positive");
  require(!t.output_dir.empty(), "train.output_dir", "must not be empty");

  require(infer.score_threshold >= 0.0 && infer.score_threshold <= 1.0, "infer.score_threshold",
          "must be in [0, 1]");
  require(infer.max_detections >= 1 && infer.max_detections <= 1000, "infer.max_detections",
          "must be in [1, 1000]");
}

std::string RunConfig::hash() const { return checkpoint::fnv1a_hex(to_json(*this).dump()); }

json to_json(const RunConfig& c) {
  return {
      {"dataset", {{"train", c.dataset.train}, {"val", c.dataset.val}}},
      {"model",
       {{"backbone_width", c.model.backbone_width},
        {"convs_per_stage", c.model.convs_per_stage},
        {"feature_channels", c.model.feature_channels},
        {"head_channels", c.model.head_channels},
        {"num_classes", c.model.num_classes},
        {"r_down", c.model.r_down},
        {"vertices", c.model.vertices},
        {"iterations", c.model.iterations},
        {"gcn_width", c.model.gcn_width},
        {"fusion_channels", c.model.fusion_channels},
        {"share_gcn_weights", c.model.share_gcn_weights},
        {"coord_mode", c.model.coord_mode}}},
      {"loss", {{"deformation", c.loss.deformation}}},
      {"train",
       {{"lr", c.train.lr},
        {"batch_size", c.train.batch_size},
        {"max_epochs", c.train.max_epochs},
        {"seed", c.train.seed},
        {"schedule", c.train.schedule},
        {"warmup_epochs", c.train.warmup_epochs},
        {"center_jitter", c.train.center_jitter},
        {"radius_jitter", c.train.radius_jitter},
        {"augment_rotation", c.train.augment_rotation},
        {"threads", c.train.threads},
        {"output_dir", c.train.output_dir}}},
      {"infer",
       {{"score_threshold", c.infer.score_threshold}, {"max_detections", c.infer.max_detections}}},
  };
}

RunConfig config_from_json(const json& j) {
  if (!j.is_object()) fail("configuration must be a JSON object");
  static const std::set<std::string> sections{"dataset", "model", "loss", "train", "infer"};
  for (const auto& [key, _] : j.items()) {
    if (!sections.count(key)) fail(key + ": unknown section");
  }
  RunConfig c;
  {
    SectionReader r(j, "dataset");
    r.read("train", c.dataset.train);
    r.read("val", c.dataset.val);
    r.finish();
  }
  {
    SectionReader r(j, "model");
    r.read("backbone_width", c.model.backbone_width);
    r.read("convs_per_stage", c.model.convs_per_stage);
    r.read("feature_channels", c.model.feature_channels);
    r.read("head_channels", c.model.head_channels);
    r.read("num_classes", c.model.num_classes);
    r.read("r_down", c.model.r_down);
    r.read("vertices", c.model.vertices);
    r.read("iterations", c.model.iterations);
    r.read("gcn_width", c.model.gcn_width);
    r.read("fusion_channels", c.model.fusion_channels);
    r.read("share_gcn_weights", c.model.share_gcn_weights);
    r.read("coord_mode", c.model.coord_mode);
    r.finish();
  }
  {
    SectionReader r(j, "loss");
    r.read("deformation", c.loss.deformation);
    r.finish();
  }
  {
    SectionReader r(j, "train");
    r.read("lr", c.train.lr);
    r.read("batch_size", c.train.batch_size);
    r.read("max_epochs", c.train.max_epochs);
    r.read("seed", c.train.seed);
    r.read("schedule", c.train.schedule);
    r.read("warmup_epochs", c.train.warmup_epochs);
    r.read("center_jitter", c.train.center_jitter);
    r.read("radius_jitter", c.train.radius_jitter);
    r.read("augment_rotation", c.train.augment_rotation);
    r.read("threads", c.train.threads);
    r.read("output_dir", c.train.output_dir);
    r.finish();
  }
  {
    SectionReader r(j, "infer");
    r.read("score_threshold", c.infer.score_threshold);
    r.read("max_detections", c.infer.max_detections);
    r.finish();
  }
  c.validate();
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCategory::io, "cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    fail(path.string() + ": invalid JSON: " + e.what());
  }
  return config_from_json(j);
}

}  // namespace circlesnake::pipeline
