#include <fstream>
#include <iomanip>
#include <sstream>

#include "circlesnake/error.hpp"
#include "circlesnake/pipeline.hpp"

namespace circlesnake::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

EvaluationSummary summarize(std::span<const evaluation::ImagePrediction> predictions,
                            std::span<const data::Sample> samples, const RunConfig& config,
                            const std::string& config_hash) {
  if (predictions.size() != samples.size()) {
    throw InvalidInput("summarize: " + std::to_string(predictions.size()) + " predictions for " +
                       std::to_string(samples.size()) + " samples");
  }
  std::vector<evaluation::GroundTruthImage> gts;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (predictions[i].image_id != samples[i].id) {
      throw InvalidInput("summarize: prediction " + std::to_string(i) + " is for '" +
                         predictions[i].image_id + "', sample is '" + samples[i].id + "'");
    }
    gts.push_back(evaluation::ground_truth_of(samples[i]));
  }
  EvaluationSummary s;
  s.detection = evaluation::evaluate_detection(predictions, gts);
  s.segmentation = evaluation::evaluate_segmentation(predictions, gts);
  const auto circles = evaluation::as_circle_proposals(predictions, config.model.vertices);
  s.proposals = evaluation::evaluate_segmentation(circles, gts);
  for (auto* r : {&s.detection, &s.segmentation, &s.proposals}) {
    r->config = to_json(config);
    r->config_hash = config_hash;
  }
  return s;
}

json to_json(const EvaluationSummary& s) {
  return {{"config_hash", s.detection.config_hash},
          {"config", s.detection.config},
          {"detection", evaluation::to_json(s.detection)},
          {"segmentation", evaluation::to_json(s.segmentation)},
          {"circle_proposal", evaluation::to_json(s.proposals)},
          {"rotation_consistency",
           s.rotation_consistency ? json(*s.rotation_consistency) : json("n/a")}};
}

std::string format_tables(const EvaluationSummary& s) {
  auto cell = [](const std::optional<double>& v) {
    std::ostringstream o;
    if (v) {
      o << std::fixed << std::setprecision(3) << *v;
    } else {
      o << "n/a";
    }
    return o.str();
  };
  std::ostringstream out;
  out << "config " << s.detection.config_hash << "\n\n";
  out << std::left << std::setw(30) << "Method" << std::setw(8) << "AP" << std::setw(8) << "AP50"
      << std::setw(8) << "AP75" << std::setw(8) << "AP_S" << "AP_M\n";
  const std::pair<const char*, const evaluation::EvalReport*> rows[] = {
      {"circle detection", &s.detection},
      {"contour segmentation", &s.segmentation},
      {"circle proposal segmentation", &s.proposals}};
  for (const auto& [name, r] : rows) {
    out << std::setw(30) << name << std::setw(8) << cell(r->ap) << std::setw(8) << cell(r->ap50)
        << std::setw(8) << cell(r->ap75) << std::setw(8) << cell(r->ap_s) << cell(r->ap_m) << "\n";
  }
  out << "\n" << std::setw(30) << "Method" << "Dice\n";
  out << std::setw(30) << "contour segmentation" << cell(s.segmentation.dice_mean) << "\n";
  out << std::setw(30) << "circle proposal segmentation" << cell(s.proposals.dice_mean) << "\n";
  if (s.rotation_consistency) {
    out << std::setw(30) << "rotation consistency" << cell(s.rotation_consistency) << "\n";
  }
  return out.str();
}

EvaluationSummary write_evaluation(std::span<const evaluation::ImagePrediction> predictions,
                                   std::span<const data::Sample> samples, const RunConfig& config,
                                   const std::string& config_hash, const fs::path& out_dir) {
  EvaluationSummary s = summarize(predictions, samples, config, config_hash);
  fs::create_directories(out_dir);
  {
    std::ofstream out(out_dir / "report.json");
    if (!out) throw Error(ErrorCategory::io, "cannot write " + (out_dir / "report.json").string());
    out << to_json(s).dump(1) << '\n';
  }
  std::ofstream out(out_dir / "tables.txt");
  if (!out) throw Error(ErrorCategory::io, "cannot write " + (out_dir / "tables.txt").string());
  out << format_tables(s);
  return s;
}

}  // namespace circlesnake::pipeline
