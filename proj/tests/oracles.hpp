#pragma once

// Independent reference computations used to freeze or cross-check expected
// values. Nothing here calls into the code paths under test.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "circlesnake/geometry.hpp"

namespace oracle {

using circlesnake::geometry::Circle;
using circlesnake::geometry::Point;

/// Stratified Monte Carlo IoU of two discs: one jittered sample per cell of a
/// side×side grid over the union's bounding box.
inline double monte_carlo_iou(const Circle& a, const Circle& b, int side, std::uint64_t seed) {
  const double x0 = std::min(a.cx - a.r, b.cx - b.r), x1 = std::max(a.cx + a.r, b.cx + b.r);
  const double y0 = std::min(a.cy - a.r, b.cy - b.r), y1 = std::max(a.cy + a.r, b.cy + b.r);
  const double dx = (x1 - x0) / side, dy = (y1 - y0) / side;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double ra2 = a.r * a.r, rb2 = b.r * b.r;
  std::int64_t both = 0, either = 0;
  for (int i = 0; i < side; ++i) {
    for (int j = 0; j < side; ++j) {
      const double x = x0 + (j + u(rng)) * dx;
      const double y = y0 + (i + u(rng)) * dy;
      const bool in_a = (x - a.cx) * (x - a.cx) + (y - a.cy) * (y - a.cy) <= ra2;
      const bool in_b = (x - b.cx) * (x - b.cx) + (y - b.cy) * (y - b.cy) <= rb2;
      both += in_a && in_b;
      either += in_a || in_b;
    }
  }
  return either == 0 ? 0.0 : static_cast<double>(both) / static_cast<double>(either);
}

/// Algebraic least-squares circle fit (Kasa): solve for D, E, F in
/// x^2 + y^2 + D x + E y + F = 0.
inline Circle kasa_fit(const std::vector<Point>& pts) {
  double m[3][4] = {};
  for (const Point& p : pts) {
    const double row[3] = {p.x, p.y, 1.0};
    const double rhs = -(p.x * p.x + p.y * p.y);
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) m[i][j] += row[i] * row[j];
      m[i][3] += row[i] * rhs;
    }
  }
  for (int c = 0; c < 3; ++c) {
    int piv = c;
    for (int r = c + 1; r < 3; ++r) if (std::abs(m[r][c]) > std::abs(m[piv][c])) piv = r;
    for (int k = 0; k < 4; ++k) std::swap(m[c][k], m[piv][k]);
    for (int r = 0; r < 3; ++r) {
      if (r == c) continue;
      const double f = m[r][c] / m[c][c];
      for (int k = 0; k < 4; ++k) m[r][k] -= f * m[c][k];
    }
  }
  const double D = m[0][3] / m[0][0], E = m[1][3] / m[1][1], F = m[2][3] / m[2][2];
  const double cx = -D / 2, cy = -E / 2;
  return {cx, cy, std::sqrt(cx * cx + cy * cy - F)};
}

/// O(n^4) minimum enclosing circle: smallest candidate (pair diameters and
/// triple circumcircles) that contains every point.
inline Circle brute_force_mec(const std::vector<Point>& pts) {
  auto contains_all = [&](const Circle& c) {
    for (const Point& p : pts) {
      if (std::hypot(p.x - c.cx, p.y - c.cy) > c.r * (1 + 1e-12) + 1e-12) return false;
    }
    return true;
  };
  Circle best{0, 0, std::numeric_limits<double>::infinity()};
  const std::size_t n = pts.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const Circle c{(pts[i].x + pts[j].x) / 2, (pts[i].y + pts[j].y) / 2,
                     std::hypot(pts[i].x - pts[j].x, pts[i].y - pts[j].y) / 2};
      if (c.r < best.r && contains_all(c)) best = c;
      for (std::size_t k = j + 1; k < n; ++k) {
        const double ax = pts[i].x, ay = pts[i].y, bx = pts[j].x, by = pts[j].y;
        const double cx = pts[k].x, cy = pts[k].y;
        const double d = 2 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by));
        if (std::abs(d) < 1e-12) continue;
        const double ux = ((ax * ax + ay * ay) * (by - cy) + (bx * bx + by * by) * (cy - ay) +
                           (cx * cx + cy * cy) * (ay - by)) / d;
        const double uy = ((ax * ax + ay * ay) * (cx - bx) + (bx * bx + by * by) * (ax - cx) +
                           (cx * cx + cy * cy) * (bx - ax)) / d;
        const Circle cc{ux, uy, std::hypot(ax - ux, ay - uy)};
        if (cc.r < best.r && contains_all(cc)) best = cc;
      }
    }
  }
  return best;
}

/// Explicit periodic padding followed by a plain "valid" correlation:
/// out[o][i] = sum_c sum_t padded[c][i + t] * w[o][c][t].
inline std::vector<std::vector<double>> periodic_padding_conv(
    const std::vector<std::vector<double>>& signal,  // [D][N]
    const std::vector<std::vector<std::vector<double>>>& kernel) {  // [D'][D][K]
  const std::size_t d_in = signal.size(), n = signal[0].size();
  const std::size_t k = kernel[0][0].size(), r = k / 2;
  std::vector<std::vector<double>> padded(d_in, std::vector<double>(n + 2 * r));
  for (std::size_t c = 0; c < d_in; ++c) {
    for (std::size_t i = 0; i < n + 2 * r; ++i) padded[c][i] = signal[c][(i + n - r) % n];
  }
  std::vector<std::vector<double>> out(kernel.size(), std::vector<double>(n, 0.0));
  for (std::size_t o = 0; o < kernel.size(); ++o) {
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t c = 0; c < d_in; ++c) {
        for (std::size_t t = 0; t < k; ++t) s += padded[c][i + t] * kernel[o][c][t];
      }
      out[o][i] = s;
    }
  }
  return out;
}

}  // namespace oracle
