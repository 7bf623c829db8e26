#pragma once

#include <filesystem>
#include <span>

#include "circlesnake/data.hpp"

namespace circlesnake::io {

/// 8-bit RGB PNG; values are quantized to k/255.
void write_png(const data::Image& image, const std::filesystem::path& path);
data::Image read_png(const std::filesystem::path& path);

/// Image with contours drawn over it.
void write_overlay(const data::Image& image, std::span<const geometry::Contour> contours,
                   std::span<const geometry::Circle> circles, const std::filesystem::path& path);

/// Instance label map (0 = background, k = k-th mask) as 16-bit PNG.
void write_label_png(std::span<const geometry::Mask> masks, int height, int width,
                     const std::filesystem::path& path);

}  // namespace circlesnake::io
