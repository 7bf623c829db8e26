#pragma once

// End-to-end runs: the combined detector + deformation model, dataset specs,
// training, inference, evaluation reports and plots.

#include <torch/torch.h>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "circlesnake/config.hpp"
#include "circlesnake/data.hpp"
#include "circlesnake/detector.hpp"
#include "circlesnake/evaluation.hpp"
#include "circlesnake/snake.hpp"
#include "json.hpp"

namespace circlesnake::pipeline {

// ---------------------------------------------------------------------------
// Model

class CircleSnakeImpl : public torch::nn::Module {
 public:
  explicit CircleSnakeImpl(const ModelConfig& config);

  struct Dense {
    torch::Tensor features;  // B×D×H/4×W/4
    detector::HeadOutputs heads;
  };
  Dense detect(const torch::Tensor& images);

  const ModelConfig& config() const { return config_; }
  detector::Backbone& backbone() { return backbone_; }
  detector::Heads& heads() { return heads_; }
  snake::Snake& snake() { return snake_; }

 private:
  ModelConfig config_;
  detector::Backbone backbone_{nullptr};
  detector::Heads heads_{nullptr};
  snake::Snake snake_{nullptr};
};
TORCH_MODULE(CircleSnake);

snake::SnakeOptions snake_options(const ModelConfig& config);

struct LoadedModel {
  RunConfig config;
  std::string config_hash;
  CircleSnake model{nullptr};
  nlohmann::json meta;
};

/// Throws Error(checkpoint) when the stored hash does not match the stored
/// configuration.
LoadedModel load_model(const std::filesystem::path& checkpoint_path);

// ---------------------------------------------------------------------------
// Datasets

/// Random-access sample source. Synthetic sets are regenerated on demand;
/// file-backed sets are held in memory.
class Dataset {
 public:
  virtual ~Dataset() = default;
  virtual std::size_t size() const = 0;
  virtual data::Sample get(std::size_t index) const = 0;
  virtual std::string describe() const = 0;
  std::vector<data::Sample> all() const;
};

/// Spec strings:
///   synthetic:seed=S,count=N,size=Z   generated on the fly
///   coco:ANNOTATIONS.json@IMAGE_ROOT  polygon annotations
///   manifest:PATH#SPLIT               a split of a gen-data output directory
///   images:DIR                        unannotated PNGs (inference only)
std::unique_ptr<Dataset> open_dataset(const std::string& spec);

// ---------------------------------------------------------------------------
// Batching

struct JitterOptions {
  double center = 0.1;
  double radius = 0.1;
};

/// B×3×H×W float tensor. All images must share one size.
torch::Tensor images_to_tensor(std::span<const data::Sample> samples);

struct TrainBatch {
  torch::Tensor images;
  detector::TargetBatch targets;
  torch::Tensor proposals;    // K×3 jittered ground-truth circles
  torch::Tensor batch_index;  // K int64
  torch::Tensor gt_contours;  // K×N×2, first vertex nearest the proposal's first vertex
};

TrainBatch make_train_batch(std::span<const data::Sample> samples, const ModelConfig& model,
                            const JitterOptions& jitter, std::mt19937_64& rng);

// ---------------------------------------------------------------------------
// Inference

/// Top-n circles above the score threshold, deformed and returned with both
/// the proposal circle and the final contour. The model is switched to eval mode.
std::vector<evaluation::ImagePrediction> predict(CircleSnake& model,
                                                 std::span<const data::Sample> samples,
                                                 const InferConfig& config, int batch_size = 8);

evaluation::ImagePrediction predict_one(CircleSnake& model, const data::Sample& sample,
                                        const InferConfig& config);

nlohmann::json predictions_to_json(std::span<const evaluation::ImagePrediction> predictions,
                                   const std::string& config_hash);
std::vector<evaluation::ImagePrediction> predictions_from_json(const nlohmann::json& j);

/// results.json plus overlays/<id>.png and masks/<id>.png under out_dir.
void write_inference_outputs(std::span<const data::Sample> samples,
                             std::span<const evaluation::ImagePrediction> predictions,
                             const std::string& config_hash, const std::filesystem::path& out_dir);

// ---------------------------------------------------------------------------
// Training

struct EpochRecord {
  int epoch = 0;  // 1-based
  double loss = 0.0;
  double focal = 0.0;
  double radius = 0.0;
  double offset = 0.0;
  double deformation = 0.0;
  double val_dice = 0.0;
  bool snake_trained = true;
  double seconds = 0.0;
};

nlohmann::json to_json(const EpochRecord& r);
EpochRecord epoch_record_from_json(const nlohmann::json& j);

struct TrainOptions {
  /// Continue from this run-state checkpoint (must carry the same config hash).
  std::optional<std::filesystem::path> resume;
  /// Stop after this many completed epochs even if max_epochs is larger.
  std::optional<int> stop_after;
  std::ostream* progress = nullptr;
  /// Validate on the first val_limit samples only (0 = all).
  std::size_t val_limit = 0;
};

struct TrainResult {
  std::filesystem::path best_checkpoint;  // highest validation Dice
  std::filesystem::path last_checkpoint;  // model + optimizer, for resuming
  std::filesystem::path log_path;
  std::vector<EpochRecord> log;
  int best_epoch = 0;
};

/// Writes best.ckpt, last.ckpt and train_log.json under config.train.output_dir.
/// Throws Error(divergence) naming the epoch and batch on a non-finite loss.
TrainResult train(const RunConfig& config, const TrainOptions& options = {});

struct StepLosses {
  torch::Tensor total;
  detector::DetectionLoss detection;
  torch::Tensor deformation;  // zero when the deformation stage is not trained
};
StepLosses compute_losses(CircleSnake& model, const TrainBatch& batch, const LossConfig& loss,
                          bool train_snake);

/// Throws Error(divergence) if any loss term is NaN or infinite.
void check_finite(const StepLosses& losses, int epoch, int batch);

/// Generator for one (seed, epoch, batch) triple; batch -1 drives the epoch shuffle.
std::mt19937_64 batch_rng(std::uint64_t seed, int epoch, int batch);

// ---------------------------------------------------------------------------
// Evaluation runs

struct EvaluationSummary {
  evaluation::EvalReport detection;
  evaluation::EvalReport segmentation;
  evaluation::EvalReport proposals;  // circle contours scored as masks
  std::optional<double> rotation_consistency;
};

EvaluationSummary summarize(std::span<const evaluation::ImagePrediction> predictions,
                            std::span<const data::Sample> samples, const RunConfig& config,
                            const std::string& config_hash);

nlohmann::json to_json(const EvaluationSummary& s);
/// Fixed-width tables: AP, AP50, AP75, AP_S, AP_M per method, then Dice.
std::string format_tables(const EvaluationSummary& s);

/// report.json, tables.txt; returns the summary.
EvaluationSummary write_evaluation(std::span<const evaluation::ImagePrediction> predictions,
                                   std::span<const data::Sample> samples, const RunConfig& config,
                                   const std::string& config_hash,
                                   const std::filesystem::path& out_dir);

// ---------------------------------------------------------------------------
// Plotting

/// SVG precision-recall curves (IoU 0.5 and 0.75) for every report section in
/// a report.json, titled with the config hash.
std::string render_pr_svg(const nlohmann::json& report);

}  // namespace circlesnake::pipeline
