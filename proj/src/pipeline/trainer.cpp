#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "circlesnake/checkpoint.hpp"
#include "circlesnake/error.hpp"
#include "circlesnake/pipeline.hpp"

namespace circlesnake::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

json to_json(const EpochRecord& r) {
  return {{"epoch", r.epoch},
          {"loss", r.loss},
          {"L_k", r.focal},
          {"L_radius", r.radius},
          {"L_off", r.offset},
          {"L_iter", r.deformation},
          {"val_dice", r.val_dice},
          {"snake_trained", r.snake_trained},
          {"seconds", r.seconds}};
}

EpochRecord epoch_record_from_json(const json& j) {
  EpochRecord r;
  r.epoch = j.at("epoch").get<int>();
  r.loss = j.at("loss").get<double>();
  r.focal = j.at("L_k").get<double>();
  r.radius = j.at("L_radius").get<double>();
  r.offset = j.at("L_off").get<double>();
  r.deformation = j.at("L_iter").get<double>();
  r.val_dice = j.at("val_dice").get<double>();
  r.snake_trained = j.value("snake_trained", true);
  r.seconds = j.value("seconds", 0.0);
  return r;
}

std::mt19937_64 batch_rng(std::uint64_t seed, int epoch, int batch) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch), static_cast<std::uint32_t>(batch)};
  return std::mt19937_64(seq);
}

StepLosses compute_losses(CircleSnake& model, const TrainBatch& batch, const LossConfig& loss,
                          bool train_snake) {
  const auto dense = model->detect(batch.images);
  StepLosses out;
  out.detection = detector::detection_loss(dense.heads, batch.targets);
  out.deformation = torch::zeros({}, out.detection.total.options());
  if (train_snake && batch.proposals.size(0) > 0) {
    const auto contours = model->snake()->forward(dense.features, batch.proposals, batch.batch_index);
    out.deformation = snake::deformation_loss(contours, batch.gt_contours,
                                              snake::deformation_loss_from_string(loss.deformation));
  }
  out.total = out.detection.total + out.deformation;
  return out;
}

void check_finite(const StepLosses& losses, int epoch, int batch) {
  const std::pair<const char*, const torch::Tensor*> terms[] = {
      {"L_k", &losses.detection.focal},
      {"L_radius", &losses.detection.radius},
      {"L_off", &losses.detection.offset},
      {"L_iter", &losses.deformation},
      {"total", &losses.total}};
  for (const auto& [name, t] : terms) {
    if (!t->defined()) continue;
    const double v = t->item<double>();
    if (!std::isfinite(v)) {
      std::ostringstream msg;
      msg << "non-finite loss " << name << " = " << v << " at epoch " << epoch << ", batch " << batch;
      throw Error(ErrorCategory::divergence, msg.str());
    }
  }
}

namespace {

std::string optimizer_bytes(torch::optim::Optimizer& opt) {
  torch::serialize::OutputArchive archive;
  opt.save(archive);
  std::ostringstream out;
  archive.save_to(out);
  return out.str();
}

void load_optimizer(torch::optim::Optimizer& opt, const std::string& bytes) {
  if (bytes.empty()) throw Error(ErrorCategory::checkpoint, "checkpoint has no optimizer state to resume from");
  torch::serialize::InputArchive archive;
  try {
    archive.load_from(bytes.data(), bytes.size());
    opt.load(archive);
  } catch (const c10::Error& e) {
    throw Error(ErrorCategory::checkpoint, std::string("corrupt optimizer state: ") + e.what_without_backtrace());
  }
}

json log_json(const std::vector<EpochRecord>& log) {
  json a = json::array();
  for (const auto& r : log) a.push_back(to_json(r));
  return a;
}

void write_text(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw Error(ErrorCategory::io, "cannot write " + tmp.string());
    out << text;
  }
  fs::rename(tmp, path);
}

double validation_dice(CircleSnake& model, std::span<const data::Sample> val, const InferConfig& infer) {
  const auto preds = predict(model, val, infer);
  std::vector<evaluation::GroundTruthImage> gts;
  for (const auto& s : val) gts.push_back(evaluation::ground_truth_of(s));
  return evaluation::evaluate_segmentation(preds, gts).dice_mean.value_or(0.0);
}

}  // namespace

TrainResult train(const RunConfig& config, const TrainOptions& options) {
  config.validate();
  const TrainConfig& tc = config.train;
  const std::string hash = config.hash();
  torch::set_num_threads(tc.threads);

  const auto train_set = open_dataset(config.dataset.train);
  const auto val_set = open_dataset(config.dataset.val);
  if (train_set->size() == 0) throw InvalidInput("training set " + train_set->describe() + " is empty");
  std::vector<data::Sample> val = val_set->all();
  if (options.val_limit > 0 && val.size() > options.val_limit) val.resize(options.val_limit);
  if (val.empty()) throw InvalidInput("validation set " + val_set->describe() + " is empty");

  torch::manual_seed(tc.seed);
  CircleSnake model(config.model);
  torch::optim::Adam opt(model->parameters(), torch::optim::AdamOptions(tc.lr));

  const fs::path out_dir = tc.output_dir;
  fs::create_directories(out_dir);
  TrainResult result;
  result.best_checkpoint = out_dir / "best.ckpt";
  result.last_checkpoint = out_dir / "last.ckpt";
  result.log_path = out_dir / "train_log.json";

  int start_epoch = 1;
  double best_dice = -1.0;
  if (options.resume) {
    checkpoint::Checkpoint ckpt = checkpoint::load(*options.resume);
    if (ckpt.config_hash != hash) {
      throw Error(ErrorCategory::checkpoint, options.resume->string() + " was written by config " +
                                                 ckpt.config_hash + ", this run is " + hash);
    }
    checkpoint::restore(*model, ckpt.tensors);
    load_optimizer(opt, ckpt.optimizer_state);
    try {
      start_epoch = ckpt.meta.at("epoch").get<int>() + 1;
      for (const json& r : ckpt.meta.at("log")) result.log.push_back(epoch_record_from_json(r));
      best_dice = ckpt.meta.at("best_val_dice").get<double>();
      result.best_epoch = ckpt.meta.at("best_epoch").get<int>();
    } catch (const json::exception& e) {
      throw Error(ErrorCategory::checkpoint, "run state missing from " + options.resume->string() + ": " + e.what());
    }
  }

  const std::size_t n = train_set->size();
  const std::size_t bs = static_cast<std::size_t>(tc.batch_size);
  const std::size_t batches = (n + bs - 1) / bs;
  const JitterOptions jitter{tc.center_jitter, tc.radius_jitter};
  int completed = 0;

  for (int epoch = start_epoch; epoch <= tc.max_epochs; ++epoch) {
    if (options.stop_after && completed >= *options.stop_after) break;
    const auto t0 = std::chrono::steady_clock::now();
    const bool train_snake = !(tc.schedule == "two_stage" && epoch <= tc.warmup_epochs);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto shuffle_rng = batch_rng(tc.seed, epoch, -1);
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    model->train();
    EpochRecord rec;
    rec.epoch = epoch;
    rec.snake_trained = train_snake;
    for (std::size_t b = 0; b < batches; ++b) {
      auto rng = batch_rng(tc.seed, epoch, static_cast<int>(b));
      std::vector<data::Sample> samples;
      for (std::size_t i = b * bs; i < std::min(n, (b + 1) * bs); ++i) {
        data::Sample s = train_set->get(order[i]);
        if (tc.augment_rotation) {
          const int quarter = std::uniform_int_distribution<int>(0, 3)(rng);
          if (quarter != 0 && s.image.height == s.image.width) s = data::rotate_sample(s, 90 * quarter);
        }
        samples.push_back(std::move(s));
      }
      const TrainBatch batch = make_train_batch(samples, config.model, jitter, rng);
      const StepLosses losses = compute_losses(model, batch, config.loss, train_snake);
      check_finite(losses, epoch, static_cast<int>(b));
      opt.zero_grad();
      losses.total.backward();
      opt.step();
      rec.loss += losses.total.item<double>();
      rec.focal += losses.detection.focal.item<double>();
      rec.radius += losses.detection.radius.item<double>();
      rec.offset += losses.detection.offset.item<double>();
      rec.deformation += losses.deformation.item<double>();
    }
    const double nb = static_cast<double>(batches);
    rec.loss /= nb;
    rec.focal /= nb;
    rec.radius /= nb;
    rec.offset /= nb;
    rec.deformation /= nb;
    rec.val_dice = validation_dice(model, val, config.infer);
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.log.push_back(rec);
    ++completed;

    const bool improved = rec.val_dice > best_dice;
    if (improved) {
      best_dice = rec.val_dice;
      result.best_epoch = epoch;
    }
    checkpoint::Checkpoint ckpt;
    ckpt.config = to_json(config);
    ckpt.config_hash = hash;
    ckpt.tensors = checkpoint::state_of(*model);
    ckpt.meta = {{"epoch", epoch},
                 {"val_dice", rec.val_dice},
                 {"best_epoch", result.best_epoch},
                 {"best_val_dice", best_dice},
                 {"log", log_json(result.log)}};
    if (improved) checkpoint::save(ckpt, result.best_checkpoint);
    ckpt.optimizer_state = optimizer_bytes(opt);
    checkpoint::save(ckpt, result.last_checkpoint);
    write_text(result.log_path,
               json{{"config_hash", hash}, {"config", to_json(config)}, {"epochs", log_json(result.log)}}
                       .dump(1) +
                   "\n");

    if (options.progress) {
      *options.progress << std::fixed << std::setprecision(4) << "epoch " << epoch << "/"
                        << tc.max_epochs << " loss " << rec.loss << " L_k " << rec.focal
                        << " L_radius " << rec.radius << " L_off " << rec.offset << " L_iter "
                        << rec.deformation << " val_dice " << rec.val_dice << " (" << std::setprecision(1)
                        << rec.seconds << " s)" << std::endl;
    }
  }
  return result;
}

}  // namespace circlesnake::pipeline
