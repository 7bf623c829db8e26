// circlesnake: train, infer, eval, gen-data and plot subcommands.
// Failures print "error[<category>]: <message>" to stderr and exit with the
// category's code.

#include <algorithm>
#include <fstream>
#include <iostream>
#include <numeric>

#include "CLI11.hpp"
#include "circlesnake/error.hpp"
#include "circlesnake/image_io.hpp"
#include "circlesnake/pipeline.hpp"

namespace fs = std::filesystem;
using namespace circlesnake;
using nlohmann::json;

namespace {

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error(ErrorCategory::io, "cannot write " + path.string());
  out << text;
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCategory::io, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw InvalidInput(path.string() + ": invalid JSON: " + e.what());
  }
}

int run_train(const fs::path& config_path, const std::string& resume, int stop_after) {
  const pipeline::RunConfig config = pipeline::load_config(config_path);
  pipeline::TrainOptions options;
  if (!resume.empty()) options.resume = resume;
  if (stop_after > 0) options.stop_after = stop_after;
  options.progress = &std::cout;
  std::cout << "config " << config.hash() << "\n";
  const auto result = pipeline::train(config, options);
  std::cout << "best " << result.best_checkpoint.string() << " (epoch " << result.best_epoch << ")\n"
            << "last " << result.last_checkpoint.string() << "\n"
            << "log " << result.log_path.string() << "\n";
  return 0;
}

int run_infer(const fs::path& ckpt, const std::string& input, const fs::path& out_dir) {
  auto loaded = pipeline::load_model(ckpt);
  torch::set_num_threads(loaded.config.train.threads);
  const std::string spec = fs::is_directory(input) ? "images:" + input : input;
  const auto samples = pipeline::open_dataset(spec)->all();
  const auto preds = pipeline::predict(loaded.model, samples, loaded.config.infer);
  pipeline::write_inference_outputs(samples, preds, loaded.config_hash, out_dir);
  std::size_t total = 0;
  for (const auto& p : preds) total += p.instances.size();
  std::cout << samples.size() << " images, " << total << " instances -> "
            << (out_dir / "results.json").string() << "\n";
  return 0;
}

int run_eval(const std::string& ckpt, const std::string& predictions_path, const std::string& dataset,
             const fs::path& out_dir, bool rotation) {
  if (ckpt.empty()) throw InvalidInput("eval needs --ckpt (the run configuration comes from it)");
  auto loaded = pipeline::load_model(ckpt);
  torch::set_num_threads(loaded.config.train.threads);
  const auto samples = pipeline::open_dataset(dataset)->all();
  std::vector<evaluation::ImagePrediction> preds;
  if (!predictions_path.empty()) {
    const json doc = read_json(predictions_path);
    if (doc.value("config_hash", std::string{}) != loaded.config_hash) {
      throw Error(ErrorCategory::checkpoint, predictions_path + " was produced by config " +
                                                 doc.value("config_hash", std::string{"?"}) +
                                                 ", checkpoint is " + loaded.config_hash);
    }
    preds = pipeline::predictions_from_json(doc);
  } else {
    preds = pipeline::predict(loaded.model, samples, loaded.config.infer);
  }
  auto summary = pipeline::summarize(preds, samples, loaded.config, loaded.config_hash);
  if (rotation) {
    const evaluation::Predictor predictor = [&](const data::Sample& s) {
      return pipeline::predict_one(loaded.model, s, loaded.config.infer);
    };
    summary.rotation_consistency = evaluation::rotation_consistency(predictor, samples);
  }
  fs::create_directories(out_dir);
  write_file(out_dir / "report.json", pipeline::to_json(summary).dump(1) + "\n");
  const std::string tables = pipeline::format_tables(summary);
  write_file(out_dir / "tables.txt", tables);
  std::cout << tables;
  return 0;
}

int run_gen_data(std::uint64_t seed, int count, int size, double val_fraction, double test_fraction,
                 const fs::path& out_dir) {
  if (count < 1) throw InvalidInput("--count must be positive");
  if (val_fraction < 0 || test_fraction < 0 || val_fraction + test_fraction > 1) {
    throw InvalidInput("split fractions must be nonnegative and sum to at most 1");
  }
  const auto config = data::SynthConfig::for_size(size);
  const auto samples = data::generate_synthetic(seed, count, config);
  data::export_coco(samples, out_dir / "annotations.json", out_dir / "images");

  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_test = static_cast<std::size_t>(test_fraction * count + 0.5);
  const auto n_val = static_cast<std::size_t>(val_fraction * count + 0.5);
  data::DatasetManifest manifest;
  manifest.source = "annotations.json";
  manifest.seed = seed;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const char* split = k < n_test ? "test" : (k < n_test + n_val ? "val" : "train");
    manifest.splits[split].push_back(samples[order[k]].id);
  }
  for (auto& [_, ids] : manifest.splits) std::sort(ids.begin(), ids.end());
  data::write_manifest(manifest, out_dir / "manifest.json");
  std::cout << count << " images -> " << out_dir.string() << " (manifest:" << out_dir.string()
            << "#train|val|test)\n";
  return 0;
}

int run_plot(const fs::path& report_path, std::string out) {
  const json report = read_json(report_path);
  if (out.empty()) out = (report_path.parent_path() / "pr_curves.svg").string();
  write_file(out, pipeline::render_pr_svg(report));
  std::cout << out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Circle-representation instance segmentation"};
  app.require_subcommand(1);

  std::string config_path, resume, ckpt, input, out, eval_out, plot_out, dataset, predictions, report;
  int stop_after = 0, count = 0, size = 512;
  std::uint64_t seed = 0;
  double val_fraction = 0.1, test_fraction = 0.2;
  bool rotation = false;

  auto* train = app.add_subcommand("train", "train a model from a run configuration");
  train->add_option("--config", config_path, "run configuration JSON")->required();
  train->add_option("--resume", resume, "continue from a last.ckpt");
  train->add_option("--stop-after", stop_after, "stop after this many epochs");

  auto* infer = app.add_subcommand("infer", "predict contours for a directory of PNG images");
  infer->add_option("--ckpt", ckpt, "checkpoint")->required();
  infer->add_option("--input", input, "image directory or dataset spec")->required();
  infer->add_option("--out", out, "output directory")->required();

  auto* eval = app.add_subcommand("eval", "score a checkpoint on an annotated dataset");
  eval->add_option("--ckpt", ckpt, "checkpoint")->required();
  eval->add_option("--dataset", dataset, "dataset spec")->required();
  eval->add_option("--predictions", predictions, "score this results.json instead of running inference");
  eval->add_option("--out", eval_out, "report directory")->default_val("eval_report");
  eval->add_flag("--rotation-consistency", rotation, "also measure agreement under quarter turns");

  auto* gen = app.add_subcommand("gen-data", "write a synthetic dataset with a split manifest");
  gen->add_option("--seed", seed, "generator seed")->required();
  gen->add_option("--count", count, "number of images")->required();
  gen->add_option("--out", out, "output directory")->required();
  gen->add_option("--size", size, "image side in pixels")->default_val(512);
  gen->add_option("--val-fraction", val_fraction)->default_val(0.1);
  gen->add_option("--test-fraction", test_fraction)->default_val(0.2);

  auto* plot = app.add_subcommand("plot", "render precision-recall curves from a report.json");
  plot->add_option("--report", report, "report.json")->required();
  plot->add_option("--out", plot_out, "SVG path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error[" << to_string(ErrorCategory::invalid_input) << "]: " << e.what() << "\n";
    return exit_code(ErrorCategory::invalid_input);
  }

  try {
    if (*train) return run_train(config_path, resume, stop_after);
    if (*infer) return run_infer(ckpt, input, out);
    if (*eval) return run_eval(ckpt, predictions, dataset, eval_out, rotation);
    if (*gen) return run_gen_data(seed, count, size, val_fraction, test_fraction, out);
    if (*plot) return run_plot(report, plot_out);
  } catch (const Error& e) {
    std::cerr << "error[" << to_string(e.category()) << "]: " << e.what() << "\n";
    return exit_code(e.category());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error[" << to_string(ErrorCategory::io) << "]: " << e.what() << "\n";
    return exit_code(ErrorCategory::io);
  } catch (const std::exception& e) {
    std::cerr << "error[" << to_string(ErrorCategory::internal) << "]: " << e.what() << "\n";
    return exit_code(ErrorCategory::internal);
  }
  return exit_code(ErrorCategory::internal);
}
