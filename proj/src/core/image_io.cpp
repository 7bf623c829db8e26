#include "circlesnake/image_io.hpp"

#include <algorithm>
#include <cmath>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "circlesnake/error.hpp"

namespace circlesnake::io {

namespace {

cv::Mat to_bgr8(const data::Image& image) {
  cv::Mat mat(image.height, image.width, CV_8UC3);
  for (int row = 0; row < image.height; ++row) {
    auto* dst = mat.ptr<cv::Vec3b>(row);
    for (int col = 0; col < image.width; ++col) {
      for (int ch = 0; ch < 3; ++ch) {
        const float v = std::clamp(image.at(row, col, ch), 0.f, 1.f);
        dst[col][2 - ch] = static_cast<std::uint8_t>(std::lround(v * 255.f));
      }
    }
  }
  return mat;
}

void write_mat(const cv::Mat& mat, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  if (!cv::imwrite(path.string(), mat)) throw Error(ErrorCategory::io, "cannot write " + path.string());
}

}  // namespace

void write_png(const data::Image& image, const std::filesystem::path& path) {
  write_mat(to_bgr8(image), path);
}

data::Image read_png(const std::filesystem::path& path) {
  const cv::Mat mat = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (mat.empty()) throw Error(ErrorCategory::io, "cannot read image " + path.string());
  data::Image image(mat.rows, mat.cols);
  for (int row = 0; row < mat.rows; ++row) {
    const auto* src = mat.ptr<cv::Vec3b>(row);
    for (int col = 0; col < mat.cols; ++col) {
      for (int ch = 0; ch < 3; ++ch) image.at(row, col, ch) = src[col][2 - ch] / 255.f;
    }
  }
  return image;
}

void write_overlay(const data::Image& image, std::span<const geometry::Contour> contours,
                   std::span<const geometry::Circle> circles, const std::filesystem::path& path) {
  cv::Mat mat = to_bgr8(image);
  constexpr int kShift = 4;  // sub-pixel drawing precision
  const double scale = 1 << kShift;
  for (const auto& c : circles) {
    cv::circle(mat, cv::Point(static_cast<int>(c.cx * scale), static_cast<int>(c.cy * scale)),
               static_cast<int>(c.r * scale), cv::Scalar(255, 160, 0), 1, cv::LINE_AA, kShift);
  }
  for (const auto& contour : contours) {
    std::vector<cv::Point> pts;
    for (const auto& p : contour) {
      pts.emplace_back(static_cast<int>(p.x * scale), static_cast<int>(p.y * scale));
    }
    cv::polylines(mat, pts, true, cv::Scalar(40, 220, 40), 1, cv::LINE_AA, kShift);
  }
  write_mat(mat, path);
}

void write_label_png(std::span<const geometry::Mask> masks, int height, int width,
                     const std::filesystem::path& path) {
  cv::Mat labels(height, width, CV_16UC1, cv::Scalar(0));
  for (std::size_t k = 0; k < masks.size(); ++k) {
    const auto& m = masks[k];
    if (m.height() != height || m.width() != width) {
      throw InvalidInput("write_label_png: mask shape differs from image");
    }
    for (int row = 0; row < height; ++row) {
      for (int col = 0; col < width; ++col) {
        if (m.at(row, col)) labels.at<std::uint16_t>(row, col) = static_cast<std::uint16_t>(k + 1);
      }
    }
  }
  write_mat(labels, path);
}

}  // namespace circlesnake::io
