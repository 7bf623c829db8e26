#pragma once

#include <cstddef>
#include <vector>

namespace circlesnake {

/// Dense channel-major C×H×W array.
template <class T>
class Grid3 {
 public:
  Grid3() = default;
  Grid3(int channels, int height, int width, T fill = T{})
      : channels_(channels),
        height_(height),
        width_(width),
        data_(static_cast<std::size_t>(channels) * height * width, fill) {}

  int channels() const noexcept { return channels_; }
  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  std::size_t size() const noexcept { return data_.size(); }

  T& at(int c, int row, int col) { return data_[index(c, row, col)]; }
  const T& at(int c, int row, int col) const { return data_[index(c, row, col)]; }

  std::vector<T>& data() noexcept { return data_; }
  const std::vector<T>& data() const noexcept { return data_; }

  bool operator==(const Grid3&) const = default;

 private:
  std::size_t index(int c, int row, int col) const {
    return (static_cast<std::size_t>(c) * height_ + row) * width_ + col;
  }

  int channels_ = 0;
  int height_ = 0;
  int width_ = 0;
  std::vector<T> data_;
};

}  // namespace circlesnake
