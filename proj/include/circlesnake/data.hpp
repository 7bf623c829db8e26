#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "circlesnake/encoding.hpp"

namespace circlesnake::data {

/// Interleaved RGB image, row-major, values in [0, 1].
struct Image {
  int height = 0;
  int width = 0;
  std::vector<float> pixels;

  Image() = default;
  Image(int h, int w) : height(h), width(w), pixels(static_cast<std::size_t>(h) * w * 3, 0.f) {}

  float& at(int row, int col, int ch) {
    return pixels[(static_cast<std::size_t>(row) * width + col) * 3 + ch];
  }
  float at(int row, int col, int ch) const {
    return pixels[(static_cast<std::size_t>(row) * width + col) * 3 + ch];
  }
  friend bool operator==(const Image&, const Image&) = default;
};

struct Sample {
  std::string id;
  Image image;
  std::vector<encoding::InstanceRecord> instances;
};

// ---------------------------------------------------------------------------
// Synthetic ball-shaped objects

struct SynthConfig {
  int image_size = 512;
  int min_objects = 1;
  int max_objects = 5;
  /// Enclosing-circle radius range in pixels.
  double min_radius = 16.0;
  double max_radius = 96.0;
  /// Upper bound on the ellipse axis ratio (>= 1).
  double max_eccentricity = 1.3;
  /// Peak relative amplitude of the radial harmonics (orders 2..4).
  double harmonic_amplitude = 0.15;
  bool harmonics = true;
  int boundary_vertices = 256;
  int num_classes = 1;

  /// Defaults with the radius range scaled from the 512-pixel reference.
  static SynthConfig for_size(int image_size);
};

/// Deterministic in (seed, index): samples can be regenerated independently.
Sample generate_sample(std::uint64_t seed, int index, const SynthConfig& config);
std::vector<Sample> generate_synthetic(std::uint64_t seed, int count, const SynthConfig& config);

// ---------------------------------------------------------------------------
// COCO instance annotations

struct CocoLoadReport {
  std::vector<std::string> skipped_missing_images;
  std::map<int, int> category_remap;  // file category id -> dense id
};

/// Polygon segmentations only. Optional per-annotation "circle_center" /
/// "circle_radius" fields take precedence over the minimum enclosing circle.
std::vector<Sample> load_coco(const std::filesystem::path& annotation_path,
                              const std::filesystem::path& image_root,
                              CocoLoadReport* report = nullptr);

/// Writes <image_dir>/<id>.png for every sample plus the annotation file.
void export_coco(const std::vector<Sample>& samples,
                 const std::filesystem::path& annotation_path,
                 const std::filesystem::path& image_dir);

// ---------------------------------------------------------------------------
// Rotation

/// Clockwise (on screen) rotation by a multiple of 90 degrees about the image
/// center. Lossless on the pixel grid.
geometry::Point rotate_point(geometry::Point p, int degrees, int height, int width);
Image rotate_image(const Image& image, int degrees);
Sample rotate_sample(const Sample& sample, int degrees);

/// Arbitrary-angle rotation with bilinear resampling (augmentation only).
/// Instances whose circle leaves the image are dropped.
Sample rotate_sample_bilinear(const Sample& sample, double degrees);

// ---------------------------------------------------------------------------
// Manifest

struct DatasetManifest {
  std::string source;  // "synthetic" or an annotation path
  std::uint64_t seed = 0;
  std::map<std::string, std::vector<std::string>> splits;

  /// Throws InvalidInput when an id appears in more than one split.
  void validate() const;
};

void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);
DatasetManifest read_manifest(const std::filesystem::path& path);

}  // namespace circlesnake::data
