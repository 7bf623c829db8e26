#pragma once

#include <vector>

#include "circlesnake/geometry.hpp"
#include "circlesnake/grid.hpp"

namespace circlesnake::detector {

struct Peak {
  int row = 0;
  int col = 0;
  int class_id = 0;
  double score = 0.0;
};

struct Detection {
  geometry::Circle circle;
  int class_id = 0;
  double score = 0.0;  // heatmap value at the peak
  int row = 0;         // peak cell on the downsampled grid
  int col = 0;
};

struct DecodeResult {
  std::vector<Detection> detections;  // descending score
  int dropped_nonpositive_radius = 0;
};

/// Cells not smaller than any of their (up to) 8 neighbors in the same class
/// channel, sorted by descending score with ties in (class, row, col) order,
/// truncated to n.
std::vector<Peak> extract_peaks(const Grid3<double>& heatmap, int n);

/// Circle center = (cell + offset) * r_down, radius = radius_map * r_down.
/// Peaks scoring below score_threshold are discarded; so are peaks whose
/// predicted radius is not positive (counted in the result).
DecodeResult decode_detections(const Grid3<double>& heatmap, const Grid3<double>& radius,
                               const Grid3<double>& offset, int n, int r_down,
                               double score_threshold = 0.0);

}  // namespace circlesnake::detector
