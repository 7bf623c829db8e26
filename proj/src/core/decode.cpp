#include "circlesnake/decode.hpp"

#include <algorithm>
#include <cmath>

#include "circlesnake/error.hpp"

namespace circlesnake::detector {

std::vector<Peak> extract_peaks(const Grid3<double>& heatmap, int n) {
  if (n < 1) throw InvalidInput("extract_peaks: n must be >= 1");
  const int h = heatmap.height();
  const int w = heatmap.width();
  std::vector<Peak> peaks;
  for (int c = 0; c < heatmap.channels(); ++c) {
    for (int row = 0; row < h; ++row) {
      for (int col = 0; col < w; ++col) {
        const double v = heatmap.at(c, row, col);
        bool is_peak = true;
        for (int dr = -1; dr <= 1 && is_peak; ++dr) {
          for (int dc = -1; dc <= 1; ++dc) {
            if (dr == 0 && dc == 0) continue;
            const int r2 = row + dr, c2 = col + dc;
            if (r2 < 0 || r2 >= h || c2 < 0 || c2 >= w) continue;
            if (heatmap.at(c, r2, c2) > v) {
              is_peak = false;
              break;
            }
          }
        }
        if (is_peak) peaks.push_back({row, col, c, v});
      }
    }
  }
  std::stable_sort(peaks.begin(), peaks.end(),
                   [](const Peak& a, const Peak& b) { return a.score > b.score; });
  if (peaks.size() > static_cast<std::size_t>(n)) peaks.resize(static_cast<std::size_t>(n));
  return peaks;
}

DecodeResult decode_detections(const Grid3<double>& heatmap, const Grid3<double>& radius,
                               const Grid3<double>& offset, int n, int r_down,
                               double score_threshold) {
  const int h = heatmap.height();
  const int w = heatmap.width();
  if (radius.height() != h || radius.width() != w || offset.height() != h ||
      offset.width() != w || radius.channels() != 1 || offset.channels() != 2) {
    throw InvalidInput("decode_detections: head outputs are not aligned");
  }
  if (r_down < 1) throw InvalidInput("decode_detections: downsample factor must be >= 1");

  DecodeResult result;
  for (const Peak& p : extract_peaks(heatmap, n)) {
    if (p.score < score_threshold) break;
    const double r = radius.at(0, p.row, p.col);
    if (!(r > 0.0) || !std::isfinite(r)) {
      ++result.dropped_nonpositive_radius;
      continue;
    }
    Detection d;
    d.circle = {(p.col + offset.at(0, p.row, p.col)) * r_down,
                (p.row + offset.at(1, p.row, p.col)) * r_down, r * r_down};
    d.class_id = p.class_id;
    d.score = p.score;
    d.row = p.row;
    d.col = p.col;
    result.detections.push_back(d);
  }
  return result;
}

}  // namespace circlesnake::detector
