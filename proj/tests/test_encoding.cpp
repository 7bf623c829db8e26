#include <cmath>
#include <numbers>
#include <random>

#include "circlesnake/encoding.hpp"
#include "circlesnake/error.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace circlesnake;
using namespace circlesnake::encoding;
using geometry::Circle;
using geometry::Contour;
using geometry::Point;

namespace {

InstanceRecord instance(Circle c, int cls = 0) {
  return {cls, geometry::sample_circle_contour(c, 32), c};
}

// 90-degree clockwise rotation of a target grid: new[r][c] = old[G-1-c][r].
template <class T>
Grid3<T> rotate_grid(const Grid3<T>& g) {
  Grid3<T> out(g.channels(), g.width(), g.height());
  for (int ch = 0; ch < g.channels(); ++ch) {
    for (int r = 0; r < out.height(); ++r) {
      for (int c = 0; c < out.width(); ++c) out.at(ch, r, c) = g.at(ch, g.height() - 1 - c, r);
    }
  }
  return out;
}

}  // namespace

TEST_CASE("min enclosing circle: equilateral triangle") {
  const double s = 7.0;
  const Contour tri({{0, 0}, {s, 0}, {s / 2, s * std::sqrt(3.0) / 2}});
  CHECK(min_enclosing_circle(tri).r == doctest::Approx(s / std::sqrt(3.0)).epsilon(1e-12));
}

TEST_CASE("min enclosing circle: two antipodal clusters") {
  std::vector<Point> pts;
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> jit(-0.5, 0.5);
  for (int k = 0; k < 10; ++k) pts.push_back({1 + jit(rng), 0.3 * jit(rng)});
  pts.push_back({0, 0});
  pts.push_back({20, 0});
  for (int k = 0; k < 10; ++k) pts.push_back({19 + jit(rng), 0.3 * jit(rng)});
  const Circle c = min_enclosing_circle(std::span<const Point>(pts));
  CHECK(c.r == doctest::Approx(10.0).epsilon(1e-12));
  CHECK(c.cx == doctest::Approx(10.0).epsilon(1e-12));
}

TEST_CASE("min enclosing circle: random polygons, containment and tightness") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-50, 50);
  for (int t = 0; t < 100; ++t) {
    std::vector<Point> pts;
    for (int k = 0; k < 50; ++k) pts.push_back({u(rng), u(rng)});
    const Circle c = min_enclosing_circle(Contour(pts));
    bool excluded = false;
    for (const Point& p : pts) {
      CHECK(geometry::distance(p, c.center()) <= c.r + 1e-9);
      excluded |= geometry::distance(p, c.center()) > c.r - 1e-6;
    }
    CHECK(excluded);
  }
}

TEST_CASE("min enclosing circle matches the brute-force enumeration") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-10, 10);
  for (int t = 0; t < 100; ++t) {
    std::vector<Point> pts;
    const int n = 3 + t % 10;
    for (int k = 0; k < n; ++k) pts.push_back({u(rng), u(rng)});
    const Circle fast = min_enclosing_circle(std::span<const Point>(pts));
    const Circle slow = oracle::brute_force_mec(pts);
    CHECK(std::abs(fast.r - slow.r) < 1e-9);
    CHECK(std::abs(fast.cx - slow.cx) < 1e-7);
    CHECK(std::abs(fast.cy - slow.cy) < 1e-7);
  }
}

TEST_CASE("min enclosing circle: degenerate input") {
  CHECK_THROWS_AS(min_enclosing_circle(Contour({{1, 1}, {1, 1}, {1, 1}})), InvalidInput);
  CHECK_THROWS_AS(min_enclosing_circle(Contour({{1, 1}, {2, 1}})), InvalidInput);
  // Collinear points are fine: the farthest pair spans the circle.
  const Circle c = min_enclosing_circle(Contour({{0, 0}, {1, 0}, {4, 0}}));
  CHECK(c.r == doctest::Approx(2.0));
}

TEST_CASE("gaussian sigma: shift keeps IoU at 0.7, floored at one cell") {
  const double f = max_shift_fraction(0.7);
  CHECK(geometry::circle_iou({0, 0, 1}, {f, 0, 1}) == doctest::Approx(0.7).epsilon(1e-9));
  CHECK(gaussian_sigma(1.0) == 1.0);
  CHECK(gaussian_sigma(100.0) == doctest::Approx(100.0 * f / 3.0));
}

TEST_CASE("splat: center is one, distance sigma is exp(-1/2)") {
  TargetMaps t(1, 16, 16);
  splat_gaussian(t, {5, 7}, 2.0, 0);
  CHECK(t.heatmap.at(0, 7, 5) == 1.0);
  CHECK(t.heatmap.at(0, 7, 7) == doctest::Approx(std::exp(-0.5)).epsilon(1e-14));
  CHECK(t.heatmap.at(0, 5, 5) == doctest::Approx(0.6065).epsilon(1e-4));
}

TEST_CASE("splat: overlapping objects keep the elementwise max") {
  TargetMaps t(1, 20, 20);
  const Point a{6, 6}, b{9.5, 8};
  splat_gaussian(t, a, 2.5, 0);
  splat_gaussian(t, b, 1.5, 0);
  for (int r = 0; r < 20; ++r) {
    for (int c = 0; c < 20; ++c) {
      const double ga = std::exp(-((c - a.x) * (c - a.x) + (r - a.y) * (r - a.y)) / (2 * 2.5 * 2.5));
      const double gb = std::exp(-((c - b.x) * (c - b.x) + (r - b.y) * (r - b.y)) / (2 * 1.5 * 1.5));
      CHECK(t.heatmap.at(0, r, c) == doctest::Approx(std::max(ga, gb)).epsilon(1e-14));
    }
  }
}

TEST_CASE("encode: exact division and fractional remainders") {
  const InstanceRecord one = instance({40, 20, 12});
  TargetMaps t = encode_targets(std::span(&one, 1), 64, 64, 4, 1);
  REQUIRE(t.positives.size() == 1);
  CHECK(t.positives[0].col == 10);
  CHECK(t.positives[0].row == 5);
  CHECK(t.positives[0].radius == 3.0);
  CHECK(t.positives[0].dx == 0.0);
  CHECK(t.positives[0].dy == 0.0);
  CHECK(t.pos_mask.at(0, 5, 10) == 1);
  CHECK(t.heatmap.at(0, 5, 10) == 1.0);
  CHECK(t.radius.at(0, 5, 10) == 3.0);

  const InstanceRecord frac = instance({42, 21, 12});
  t = encode_targets(std::span(&frac, 1), 64, 64, 4, 1);
  CHECK(t.positives[0].col == 10);
  CHECK(t.positives[0].row == 5);
  CHECK(t.offset.at(0, 5, 10) == 0.5);
  CHECK(t.offset.at(1, 5, 10) == 0.25);
}

TEST_CASE("encode: empty list and out-of-image centers") {
  TargetMaps t = encode_targets({}, 32, 32, 4, 2);
  CHECK(t.positives.empty());
  CHECK(t.heatmap.channels() == 2);
  CHECK(t.heatmap.height() == 8);
  for (double v : t.heatmap.data()) CHECK(v == 0.0);
  for (auto v : t.pos_mask.data()) CHECK(v == 0);

  const InstanceRecord outside = instance({40, 5, 3});
  t = encode_targets(std::span(&outside, 1), 32, 32, 4, 1);
  CHECK(t.skipped == 1);
  CHECK(t.positives.empty());
  CHECK_THROWS_AS(encode_targets({}, 30, 32, 4, 1), InvalidInput);
}

TEST_CASE("encode: heatmap bounded by one and monotone in added objects") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> pos(10, 118), rad(4, 30);
  for (int t = 0; t < 20; ++t) {
    std::vector<InstanceRecord> insts;
    TargetMaps prev = encode_targets(insts, 128, 128, 4, 1);
    for (int k = 0; k < 5; ++k) {
      insts.push_back(instance({pos(rng), pos(rng), rad(rng)}));
      TargetMaps next = encode_targets(insts, 128, 128, 4, 1);
      for (std::size_t i = 0; i < next.heatmap.size(); ++i) {
        CHECK(next.heatmap.data()[i] <= 1.0);
        CHECK(next.heatmap.data()[i] >= prev.heatmap.data()[i]);
      }
      for (const Positive& p : next.positives) CHECK(next.heatmap.at(0, p.row, p.col) == 1.0);
      prev = std::move(next);
    }
  }
}

TEST_CASE("encode: exactly equivariant under 90-degree rotation") {
  // Dyadic centers that never sit on a cell boundary keep every floor and
  // remainder exact on both sides.
  std::mt19937_64 rng(9);
  const int size = 128, g = size / 4;
  std::uniform_int_distribution<int> cell(2, g - 3), frac(1, 255);
  std::uniform_real_distribution<double> rad(3, 12);
  for (int t = 0; t < 50; ++t) {
    std::vector<InstanceRecord> insts, rotated;
    for (int k = 0; k < 4; ++k) {
      const double x = 4.0 * cell(rng) + frac(rng) / 64.0;
      const double y = 4.0 * cell(rng) + frac(rng) / 64.0;
      const double r = rad(rng);
      insts.push_back(instance({x, y, r}));
      rotated.push_back(instance({size - y, x, r}));
    }
    const TargetMaps a = encode_targets(insts, size, size, 4, 1);
    const TargetMaps b = encode_targets(rotated, size, size, 4, 1);
    CHECK(rotate_grid(a.heatmap) == b.heatmap);
    CHECK(rotate_grid(a.radius) == b.radius);
    CHECK(rotate_grid(a.pos_mask) == b.pos_mask);
    // Offsets: dx' = 1 - dy, dy' = dx at positive cells.
    Grid3<double> remapped = rotate_grid(a.offset);
    const Grid3<std::uint8_t> pos = rotate_grid(a.pos_mask);
    Grid3<double> expected(2, g, g);
    for (int r = 0; r < g; ++r) {
      for (int c = 0; c < g; ++c) {
        if (!pos.at(0, r, c)) continue;
        expected.at(0, r, c) = 1.0 - remapped.at(1, r, c);
        expected.at(1, r, c) = remapped.at(0, r, c);
      }
    }
    CHECK(expected == b.offset);
  }
}
