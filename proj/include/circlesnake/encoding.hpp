#pragma once

#include <span>
#include <vector>

#include "circlesnake/geometry.hpp"
#include "circlesnake/grid.hpp"

namespace circlesnake::encoding {

/// One annotated object.
struct InstanceRecord {
  int class_id = 0;
  geometry::Contour boundary;
  geometry::Circle circle;
};

/// Supervision point of one object on the downsampled grid.
struct Positive {
  int row = 0;
  int col = 0;
  int class_id = 0;
  double radius = 0.0;  // downsampled units
  double dx = 0.0;      // sub-cell offset, x then y
  double dy = 0.0;
};

/// Training targets for one image on the (H/R)×(W/R) grid.
struct TargetMaps {
  Grid3<double> heatmap;            // C×h×w in [0, 1]
  Grid3<double> radius;             // 1×h×w
  Grid3<double> offset;             // 2×h×w, channel 0 = x
  Grid3<std::uint8_t> pos_mask;     // 1×h×w
  std::vector<Positive> positives;  // one per encoded object, input order
  int skipped = 0;                  // instances whose center fell outside the image

  TargetMaps() = default;
  TargetMaps(int num_classes, int height, int width);
};

/// Smallest circle containing every vertex (randomized incremental
/// construction with a fixed shuffle, so results are reproducible).
geometry::Circle min_enclosing_circle(std::span<const geometry::Point> points);
geometry::Circle min_enclosing_circle(const geometry::Contour& boundary);

/// Largest center shift, as a fraction of the radius, that keeps
/// circle IoU >= min_iou between two equal circles.
double max_shift_fraction(double min_iou);

/// Gaussian standard deviation for an object of the given radius in
/// downsampled units: a third of the largest IoU>=0.7 center shift, floored
/// at one cell.
double gaussian_sigma(double radius_cells);

/// heatmap[class] = max(heatmap[class], exp(-|x - center|^2 / (2 sigma^2))).
void splat_gaussian(TargetMaps& targets, geometry::Point center, double sigma, int class_id);

TargetMaps encode_targets(std::span<const InstanceRecord> instances, int height, int width,
                          int r_down, int num_classes);

}  // namespace circlesnake::encoding
