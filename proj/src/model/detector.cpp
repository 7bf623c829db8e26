#include "circlesnake/detector.hpp"

#include "circlesnake/error.hpp"

namespace circlesnake::detector {

namespace nn = torch::nn;

namespace {

void add_conv_bn_relu(nn::Sequential& seq, int in, int out, int stride = 1, int dilation = 1) {
  seq->push_back(
      nn::Conv2d(nn::Conv2dOptions(in, out, 3).stride(stride).padding(dilation).dilation(dilation).bias(false)));
  seq->push_back(nn::BatchNorm2d(out));
  seq->push_back(nn::ReLU(nn::ReLUOptions(true)));
}

nn::Sequential stage(int in, int out, int convs) {
  nn::Sequential s;
  add_conv_bn_relu(s, in, out, 2);
  for (int k = 1; k < convs; ++k) add_conv_bn_relu(s, out, out);
  return s;
}

nn::Sequential head(int in, int mid, int out) {
  return nn::Sequential(nn::Conv2d(nn::Conv2dOptions(in, mid, 3).padding(1)),
                        nn::ReLU(nn::ReLUOptions(true)), nn::Conv2d(nn::Conv2dOptions(mid, out, 1)));
}

}  // namespace

BackboneImpl::BackboneImpl(const BackboneOptions& options) : options_(options) {
  if (options.width < 1 || options.convs_per_stage < 1 || options.feature_channels < 1) {
    throw InvalidInput("backbone: widths and depth must be positive");
  }
  const int w = options.width;
  stage1_ = register_module("stage1", stage(3, w, options.convs_per_stage));
  stage2_ = register_module("stage2", stage(w, 2 * w, options.convs_per_stage));
  stage3_ = register_module("stage3", stage(2 * w, 4 * w, options.convs_per_stage));
  nn::Sequential context;
  add_conv_bn_relu(context, 4 * w, 4 * w, 1, 2);
  add_conv_bn_relu(context, 4 * w, 4 * w, 1, 4);
  context_ = register_module("context", context);
  nn::Sequential fuse;
  add_conv_bn_relu(fuse, 6 * w, options.feature_channels);
  add_conv_bn_relu(fuse, options.feature_channels, options.feature_channels);
  fuse_ = register_module("fuse", fuse);
}

torch::Tensor BackboneImpl::forward(const torch::Tensor& images) {
  if (images.dim() != 4 || images.size(1) != 3) {
    throw InvalidInput("backbone: expected B×3×H×W images");
  }
  if (images.size(2) % 4 != 0 || images.size(3) % 4 != 0) {
    throw InvalidInput("backbone: image size must be divisible by 4");
  }
  const torch::Tensor x = (images - 0.5) * 4.0;
  const torch::Tensor s2 = stage2_->forward(stage1_->forward(x));
  torch::Tensor s3 = stage3_->forward(s2);
  s3 = s3 + context_->forward(s3);
  const torch::Tensor up = nn::functional::interpolate(
      s3, nn::functional::InterpolateFuncOptions()
              .size(std::vector<std::int64_t>{s2.size(2), s2.size(3)})
              .mode(torch::kBilinear)
              .align_corners(false));
  return fuse_->forward(torch::cat({up, s2}, 1));
}

HeadsImpl::HeadsImpl(int in_channels, int head_channels, int num_classes) {
  if (in_channels < 1 || head_channels < 1 || num_classes < 1) {
    throw InvalidInput("heads: channel counts must be positive");
  }
  heatmap_ = register_module("heatmap", head(in_channels, head_channels, num_classes));
  radius_ = register_module("radius", head(in_channels, head_channels, 1));
  offset_ = register_module("offset", head(in_channels, head_channels, 2));
  torch::NoGradGuard guard;
  heatmap_[2]->as<nn::Conv2d>()->bias.fill_(kHeatmapPriorBias);
}

HeadOutputs HeadsImpl::forward(const torch::Tensor& features) {
  return {torch::sigmoid(heatmap_->forward(features)), radius_->forward(features),
          offset_->forward(features)};
}

void HeadsImpl::zero_() {
  torch::NoGradGuard guard;
  for (auto& p : parameters()) p.zero_();
}

Grid3<double> to_grid(const torch::Tensor& chw) {
  if (chw.dim() != 3) throw InvalidInput("to_grid: expected a C×H×W tensor");
  const torch::Tensor t = chw.detach().to(torch::kCPU, torch::kFloat64).contiguous();
  Grid3<double> g(static_cast<int>(t.size(0)), static_cast<int>(t.size(1)),
                  static_cast<int>(t.size(2)));
  std::copy_n(t.data_ptr<double>(), g.size(), g.data().begin());
  return g;
}

DecodeResult decode(const HeadOutputs& out, int index, int n, int r_down, double score_threshold) {
  return decode_detections(to_grid(out.heatmap[index]), to_grid(out.radius[index]),
                           to_grid(out.offset[index]), n, r_down, score_threshold);
}

}  // namespace circlesnake::detector
