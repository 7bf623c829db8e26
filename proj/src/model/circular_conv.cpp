#include <cmath>

#include "circlesnake/error.hpp"
#include "circlesnake/snake.hpp"

namespace circlesnake::snake {

namespace idx = torch::indexing;

torch::Tensor circular_conv(const torch::Tensor& signal, const torch::Tensor& weight,
                            const torch::Tensor& bias) {
  if (signal.dim() != 3 || weight.dim() != 3) {
    throw InvalidInput("circular_conv: expected B×D×N signal and D'×D×K kernel");
  }
  const std::int64_t n = signal.size(2), window = weight.size(2);
  if (window % 2 == 0) throw InvalidInput("circular_conv: kernel window must be odd");
  if (signal.size(1) != weight.size(1)) {
    throw InvalidInput("circular_conv: signal has " + std::to_string(signal.size(1)) +
                       " channels, kernel expects " + std::to_string(weight.size(1)));
  }
  if (n < window) {
    throw InvalidInput("circular_conv: ring of " + std::to_string(n) +
                       " vertices is shorter than the kernel window " + std::to_string(window));
  }
  const std::int64_t r = window / 2;
  const torch::Tensor padded =
      torch::cat({signal.index({"...", idx::Slice(n - r, idx::None)}), signal,
                  signal.index({"...", idx::Slice(idx::None, r)})},
                 2);
  return torch::conv1d(padded, weight, bias);
}

CircularConv1dImpl::CircularConv1dImpl(int in_channels, int out_channels, int window) {
  if (in_channels < 1 || out_channels < 1 || window < 1 || window % 2 == 0) {
    throw InvalidInput("CircularConv1d: positive channels and an odd window are required");
  }
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_channels * window));
  weight = register_parameter("weight",
                              torch::empty({out_channels, in_channels, window}).uniform_(-bound, bound));
  bias = register_parameter("bias", torch::empty({out_channels}).uniform_(-bound, bound));
}

torch::Tensor CircularConv1dImpl::forward(const torch::Tensor& signal) {
  return circular_conv(signal, weight, bias);
}

}  // namespace circlesnake::snake
