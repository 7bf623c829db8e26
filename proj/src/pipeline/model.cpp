#include "circlesnake/checkpoint.hpp"
#include "circlesnake/error.hpp"
#include "circlesnake/pipeline.hpp"

namespace circlesnake::pipeline {

snake::SnakeOptions snake_options(const ModelConfig& config) {
  snake::SnakeOptions o;
  o.feature_channels = config.feature_channels;
  o.r_down = config.r_down;
  o.vertices = config.vertices;
  o.iterations = config.iterations;
  o.gcn_width = config.gcn_width;
  o.fusion_channels = config.fusion_channels;
  o.share_weights = config.share_gcn_weights;
  o.coord_mode = snake::coord_mode_from_string(config.coord_mode);
  return o;
}

CircleSnakeImpl::CircleSnakeImpl(const ModelConfig& config) : config_(config) {
  detector::BackboneOptions b;
  b.width = config.backbone_width;
  b.convs_per_stage = config.convs_per_stage;
  b.feature_channels = config.feature_channels;
  backbone_ = register_module("backbone", detector::Backbone(b));
  heads_ = register_module(
      "heads", detector::Heads(config.feature_channels, config.head_channels, config.num_classes));
  snake_ = register_module("snake", snake::Snake(snake_options(config)));
}

CircleSnakeImpl::Dense CircleSnakeImpl::detect(const torch::Tensor& images) {
  Dense d;
  d.features = backbone_->forward(images);
  d.heads = heads_->forward(d.features);
  return d;
}

LoadedModel load_model(const std::filesystem::path& checkpoint_path) {
  checkpoint::Checkpoint ckpt = checkpoint::load(checkpoint_path);
  LoadedModel out;
  try {
    out.config = config_from_json(ckpt.config);
  } catch (const Error& e) {
    throw Error(ErrorCategory::checkpoint,
                checkpoint_path.string() + ": stored configuration is invalid: " + e.what());
  }
  out.config_hash = out.config.hash();
  if (out.config_hash != ckpt.config_hash) {
    throw Error(ErrorCategory::checkpoint, checkpoint_path.string() + ": config hash mismatch (stored " +
                                               ckpt.config_hash + ", configuration hashes to " +
                                               out.config_hash + ")");
  }
  out.model = CircleSnake(out.config.model);
  checkpoint::restore(*out.model, ckpt.tensors);
  out.model->eval();
  out.meta = ckpt.meta;
  return out;
}

}  // namespace circlesnake::pipeline
