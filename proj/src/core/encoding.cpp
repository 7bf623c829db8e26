#include "circlesnake/encoding.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "circlesnake/error.hpp"

namespace circlesnake::encoding {

using geometry::Circle;
using geometry::Point;

TargetMaps::TargetMaps(int num_classes, int height, int width)
    : heatmap(num_classes, height, width),
      radius(1, height, width),
      offset(2, height, width),
      pos_mask(1, height, width) {}

namespace {

bool contains(const Circle& c, Point p) {
  const double slack = 1e-12 * std::max(1.0, c.r + std::abs(c.cx) + std::abs(c.cy));
  return geometry::distance(c.center(), p) <= c.r + slack;
}

Circle diameter_circle(Point a, Point b) {
  return {0.5 * (a.x + b.x), 0.5 * (a.y + b.y), 0.5 * geometry::distance(a, b)};
}

Circle circumcircle(Point a, Point b, Point c) {
  const double bx = b.x - a.x, by = b.y - a.y;
  const double cx = c.x - a.x, cy = c.y - a.y;
  const double d = 2.0 * (bx * cy - by * cx);
  const double scale = std::max({std::abs(bx), std::abs(by), std::abs(cx), std::abs(cy), 1e-300});
  if (std::abs(d) <= 1e-14 * scale * scale) {
    // Collinear: the enclosing circle is spanned by the farthest pair.
    Circle best = diameter_circle(a, b);
    for (const Circle cand : {diameter_circle(a, c), diameter_circle(b, c)}) {
      if (cand.r > best.r) best = cand;
    }
    return best;
  }
  const double b2 = bx * bx + by * by;
  const double c2 = cx * cx + cy * cy;
  const double ux = (cy * b2 - by * c2) / d;
  const double uy = (bx * c2 - cx * b2) / d;
  return {a.x + ux, a.y + uy, std::hypot(ux, uy)};
}

}  // namespace

Circle min_enclosing_circle(std::span<const Point> points) {
  if (points.empty()) throw InvalidInput("min_enclosing_circle: no points");
  for (const Point& p : points) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
      throw InvalidInput("min_enclosing_circle: non-finite coordinate");
    }
  }
  std::vector<Point> pts(points.begin(), points.end());
  std::mt19937_64 rng(0x9e3779b97f4a7c15ULL);
  std::shuffle(pts.begin(), pts.end(), rng);

  Circle c{pts[0].x, pts[0].y, 0.0};
  for (std::size_t i = 1; i < pts.size(); ++i) {
    if (contains(c, pts[i])) continue;
    c = {pts[i].x, pts[i].y, 0.0};
    for (std::size_t j = 0; j < i; ++j) {
      if (contains(c, pts[j])) continue;
      c = diameter_circle(pts[i], pts[j]);
      for (std::size_t k = 0; k < j; ++k) {
        if (!contains(c, pts[k])) c = circumcircle(pts[i], pts[j], pts[k]);
      }
    }
  }
  if (!(c.r > 0.0)) throw InvalidInput("min_enclosing_circle: all points coincide");
  return c;
}

Circle min_enclosing_circle(const geometry::Contour& boundary) {
  if (boundary.size() < 3) {
    throw InvalidInput("min_enclosing_circle: boundary needs at least 3 vertices");
  }
  return min_enclosing_circle(std::span<const Point>(boundary.vertices()));
}

double max_shift_fraction(double min_iou) {
  if (!(min_iou > 0.0 && min_iou < 1.0)) {
    throw InvalidInput("max_shift_fraction: IoU must lie in (0, 1)");
  }
  const Circle unit{0.0, 0.0, 1.0};
  double lo = 0.0, hi = 2.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (geometry::circle_iou(unit, Circle{mid, 0.0, 1.0}) >= min_iou) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return lo;
}

double gaussian_sigma(double radius_cells) {
  static const double kShift = max_shift_fraction(0.7);
  return std::max(kShift * radius_cells / 3.0, 1.0);
}

void splat_gaussian(TargetMaps& targets, Point center, double sigma, int class_id) {
  if (!(sigma > 0.0)) throw InvalidInput("splat_gaussian: sigma must be positive");
  Grid3<double>& heat = targets.heatmap;
  if (class_id < 0 || class_id >= heat.channels()) {
    throw InvalidInput("splat_gaussian: class id " + std::to_string(class_id) + " out of range");
  }
  const double denom = 2.0 * sigma * sigma;
  for (int row = 0; row < heat.height(); ++row) {
    const double dy = row - center.y;
    for (int col = 0; col < heat.width(); ++col) {
      const double dx = col - center.x;
      double& cell = heat.at(class_id, row, col);
      cell = std::max(cell, std::exp(-(dx * dx + dy * dy) / denom));
    }
  }
}

TargetMaps encode_targets(std::span<const InstanceRecord> instances, int height, int width,
                          int r_down, int num_classes) {
  if (r_down < 1) throw InvalidInput("encode_targets: downsample factor must be >= 1");
  if (height <= 0 || width <= 0 || height % r_down != 0 || width % r_down != 0) {
    throw InvalidInput("encode_targets: image size " + std::to_string(height) + "x" +
                       std::to_string(width) + " not divisible by " + std::to_string(r_down));
  }
  if (num_classes < 1) throw InvalidInput("encode_targets: need at least one class");

  const int out_h = height / r_down;
  const int out_w = width / r_down;
  TargetMaps targets(num_classes, out_h, out_w);

  for (const InstanceRecord& inst : instances) {
    if (inst.class_id < 0 || inst.class_id >= num_classes) {
      throw InvalidInput("encode_targets: class id " + std::to_string(inst.class_id) +
                         " out of range");
    }
    geometry::validate(inst.circle);
    const Circle& c = inst.circle;
    if (c.cx < 0.0 || c.cy < 0.0 || c.cx >= width || c.cy >= height) {
      ++targets.skipped;
      continue;
    }
    const double u = c.cx / r_down;
    const double v = c.cy / r_down;
    Positive pos;
    pos.col = std::min(static_cast<int>(std::floor(u)), out_w - 1);
    pos.row = std::min(static_cast<int>(std::floor(v)), out_h - 1);
    pos.class_id = inst.class_id;
    pos.radius = c.r / r_down;
    pos.dx = u - pos.col;
    pos.dy = v - pos.row;

    targets.pos_mask.at(0, pos.row, pos.col) = 1;
    targets.radius.at(0, pos.row, pos.col) = pos.radius;
    targets.offset.at(0, pos.row, pos.col) = pos.dx;
    targets.offset.at(1, pos.row, pos.col) = pos.dy;
    splat_gaussian(targets, Point{static_cast<double>(pos.col), static_cast<double>(pos.row)},
                   gaussian_sigma(pos.radius), pos.class_id);
    targets.positives.push_back(pos);
  }
  return targets;
}

}  // namespace circlesnake::encoding
