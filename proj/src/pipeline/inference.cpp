#include <fstream>

#include "circlesnake/error.hpp"
#include "circlesnake/image_io.hpp"
#include "circlesnake/pipeline.hpp"

namespace circlesnake::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void predict_chunk(CircleSnake& model, std::span<const data::Sample> chunk, const InferConfig& config,
                   std::vector<evaluation::ImagePrediction>& out) {
  const ModelConfig& mc = model->config();
  const auto dense = model->detect(images_to_tensor(chunk));
  std::vector<float> circles;
  std::vector<std::int64_t> owner;
  std::vector<detector::DecodeResult> decoded;
  decoded.reserve(chunk.size());
  for (std::size_t i = 0; i < chunk.size(); ++i) {
    decoded.push_back(detector::decode(dense.heads, static_cast<int>(i), config.max_detections,
                                       mc.r_down, config.score_threshold));
  }
  for (std::size_t i = 0; i < chunk.size(); ++i) {
    for (const auto& d : decoded[i].detections) {
      circles.insert(circles.end(), {static_cast<float>(d.circle.cx), static_cast<float>(d.circle.cy),
                                     static_cast<float>(d.circle.r)});
      owner.push_back(static_cast<std::int64_t>(i));
    }
  }
  std::vector<geometry::Contour> contours;
  if (!owner.empty()) {
    const long k = static_cast<long>(owner.size());
    const torch::Tensor c = torch::tensor(circles).reshape({k, 3});
    const torch::Tensor b = torch::tensor(owner, torch::kInt64).reshape({k});
    contours = snake::tensor_to_contours(model->snake()->forward(dense.features, c, b).back());
  }
  std::size_t next = 0;
  for (std::size_t i = 0; i < chunk.size(); ++i) {
    evaluation::ImagePrediction p;
    p.image_id = chunk[i].id;
    p.height = chunk[i].image.height;
    p.width = chunk[i].image.width;
    for (const auto& d : decoded[i].detections) {
      evaluation::PredictedInstance inst;
      inst.circle = d.circle;
      inst.class_id = d.class_id;
      inst.score = d.score;
      inst.contour = std::move(contours[next++]);
      p.instances.push_back(std::move(inst));
    }
    out.push_back(std::move(p));
  }
}

}  // namespace

std::vector<evaluation::ImagePrediction> predict(CircleSnake& model,
                                                 std::span<const data::Sample> samples,
                                                 const InferConfig& config, int batch_size) {
  if (batch_size < 1) throw InvalidInput("predict: batch size must be positive");
  model->eval();
  torch::NoGradGuard guard;
  std::vector<evaluation::ImagePrediction> out;
  out.reserve(samples.size());
  std::size_t start = 0;
  while (start < samples.size()) {
    // Consecutive samples of one size form a chunk.
    std::size_t end = start + 1;
    while (end < samples.size() && end - start < static_cast<std::size_t>(batch_size) &&
           samples[end].image.height == samples[start].image.height &&
           samples[end].image.width == samples[start].image.width) {
      ++end;
    }
    predict_chunk(model, samples.subspan(start, end - start), config, out);
    start = end;
  }
  return out;
}

evaluation::ImagePrediction predict_one(CircleSnake& model, const data::Sample& sample,
                                        const InferConfig& config) {
  return predict(model, std::span<const data::Sample>(&sample, 1), config).front();
}

json predictions_to_json(std::span<const evaluation::ImagePrediction> predictions,
                         const std::string& config_hash) {
  json images = json::array();
  for (const auto& p : predictions) {
    json instances = json::array();
    for (const auto& inst : p.instances) {
      json contour = json::array();
      for (const auto& v : inst.contour) contour.push_back({v.x, v.y});
      instances.push_back({{"class_id", inst.class_id},
                           {"score", inst.score},
                           {"circle", {inst.circle.cx, inst.circle.cy, inst.circle.r}},
                           {"contour", std::move(contour)}});
    }
    images.push_back({{"image_id", p.image_id},
                      {"height", p.height},
                      {"width", p.width},
                      {"instances", std::move(instances)}});
  }
  return {{"config_hash", config_hash}, {"images", std::move(images)}};
}

std::vector<evaluation::ImagePrediction> predictions_from_json(const json& j) {
  std::vector<evaluation::ImagePrediction> out;
  try {
    for (const json& im : j.at("images")) {
      evaluation::ImagePrediction p;
      p.image_id = im.at("image_id").get<std::string>();
      p.height = im.at("height").get<int>();
      p.width = im.at("width").get<int>();
      for (const json& e : im.at("instances")) {
        evaluation::PredictedInstance inst;
        inst.class_id = e.at("class_id").get<int>();
        inst.score = e.at("score").get<double>();
        const auto c = e.at("circle").get<std::vector<double>>();
        if (c.size() != 3) throw InvalidInput("predictions: circle must be [cx, cy, r]");
        inst.circle = {c[0], c[1], c[2]};
        std::vector<geometry::Point> v;
        for (const json& q : e.at("contour")) v.push_back({q.at(0).get<double>(), q.at(1).get<double>()});
        inst.contour = geometry::Contour(std::move(v));
        p.instances.push_back(std::move(inst));
      }
      out.push_back(std::move(p));
    }
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("malformed predictions: ") + e.what());
  }
  return out;
}

void write_inference_outputs(std::span<const data::Sample> samples,
                             std::span<const evaluation::ImagePrediction> predictions,
                             const std::string& config_hash, const fs::path& out_dir) {
  if (samples.size() != predictions.size()) {
    throw InvalidInput("write_inference_outputs: samples and predictions differ in count");
  }
  fs::create_directories(out_dir / "overlays");
  fs::create_directories(out_dir / "masks");
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& p = predictions[i];
    std::vector<geometry::Contour> contours;
    std::vector<geometry::Circle> circles;
    std::vector<geometry::Mask> masks;
    for (const auto& inst : p.instances) {
      contours.push_back(inst.contour);
      circles.push_back(inst.circle);
      masks.push_back(geometry::rasterize(inst.contour, p.height, p.width));
    }
    io::write_overlay(samples[i].image, contours, circles, out_dir / "overlays" / (p.image_id + ".png"));
    io::write_label_png(masks, p.height, p.width, out_dir / "masks" / (p.image_id + ".png"));
  }
  std::ofstream out(out_dir / "results.json");
  if (!out) throw Error(ErrorCategory::io, "cannot write " + (out_dir / "results.json").string());
  out << predictions_to_json(predictions, config_hash).dump() << '\n';
}

}  // namespace circlesnake::pipeline
