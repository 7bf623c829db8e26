#include "circlesnake/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <tuple>

#include "circlesnake/error.hpp"

namespace circlesnake::geometry {

double distance(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

double Circle::area() const { return std::numbers::pi * r * r; }

bool Circle::valid() const {
  return std::isfinite(cx) && std::isfinite(cy) && std::isfinite(r) && r > 0.0;
}

void validate(const Circle& c) {
  if (!c.valid()) {
    throw InvalidInput("invalid circle (" + std::to_string(c.cx) + ", " +
                       std::to_string(c.cy) + ", r=" + std::to_string(c.r) + ")");
  }
}

double Contour::perimeter() const {
  double total = 0.0;
  for (std::size_t i = 0; i < vertices_.size(); ++i) {
    total += distance(vertices_[i], vertices_[(i + 1) % vertices_.size()]);
  }
  return total;
}

double Contour::signed_area() const {
  double twice = 0.0;
  for (std::size_t i = 0; i < vertices_.size(); ++i) {
    const Point& a = vertices_[i];
    const Point& b = vertices_[(i + 1) % vertices_.size()];
    twice += a.x * b.y - b.x * a.y;
  }
  return 0.5 * twice;
}

Contour Contour::translated(double dx, double dy) const {
  std::vector<Point> moved(vertices_);
  for (Point& p : moved) {
    p.x += dx;
    p.y += dy;
  }
  return Contour(std::move(moved));
}

std::size_t Mask::count() const {
  return static_cast<std::size_t>(std::count(data_.begin(), data_.end(), std::uint8_t{1}));
}

Contour sample_circle_contour(const Circle& c, int n) {
  validate(c);
  if (n < 3) {
    throw InvalidInput("circle contour needs at least 3 vertices, got " + std::to_string(n));
  }
  std::vector<Point> vertices(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    const double theta = 2.0 * std::numbers::pi * k / n;
    vertices[static_cast<std::size_t>(k)] = {c.cx + c.r * std::sin(theta),
                                             c.cy - c.r * std::cos(theta)};
  }
  return Contour(std::move(vertices));
}

Contour sample_boundary_contour(const Contour& polygon, int n, Point anchor) {
  if (n < 3) {
    throw InvalidInput("boundary contour needs at least 3 vertices, got " + std::to_string(n));
  }
  if (polygon.size() < 3) throw InvalidInput("boundary polygon has fewer than 3 vertices");
  for (const Point& p : polygon) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
      throw InvalidInput("boundary polygon has non-finite coordinates");
    }
  }

  std::vector<Point> ring = polygon.vertices();
  if (polygon.signed_area() < 0.0) std::reverse(ring.begin(), ring.end());
  const std::size_t m = ring.size();

  std::vector<double> start(m);  // arc length at the start of each edge
  std::vector<double> length(m);
  double perimeter = 0.0;
  for (std::size_t e = 0; e < m; ++e) {
    start[e] = perimeter;
    length[e] = distance(ring[e], ring[(e + 1) % m]);
    perimeter += length[e];
  }
  if (!(perimeter > 0.0)) throw InvalidInput("boundary polygon has zero perimeter");

  double best = std::numeric_limits<double>::infinity();
  double anchor_arc = 0.0;
  for (std::size_t e = 0; e < m; ++e) {
    const Point a = ring[e];
    const Point d = ring[(e + 1) % m] - a;
    const double len2 = d.x * d.x + d.y * d.y;
    double t = 0.0;
    if (len2 > 0.0) {
      t = std::clamp(((anchor.x - a.x) * d.x + (anchor.y - a.y) * d.y) / len2, 0.0, 1.0);
    }
    const double dist = distance(a + t * d, anchor);
    if (dist < best) {
      best = dist;
      anchor_arc = start[e] + t * length[e];
    }
  }

  const double spacing = perimeter / n;
  std::vector<Point> out(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    double s = anchor_arc + k * spacing;
    while (s >= perimeter) s -= perimeter;
    auto it = std::upper_bound(start.begin(), start.end(), s);
    const std::size_t e = static_cast<std::size_t>(std::distance(start.begin(), it)) - 1;
    const Point a = ring[e];
    const Point b = ring[(e + 1) % m];
    const double t = length[e] > 0.0 ? (s - start[e]) / length[e] : 0.0;
    out[static_cast<std::size_t>(k)] = a + t * (b - a);
  }
  return Contour(std::move(out));
}

double circle_intersection_area(const Circle& first, const Circle& second) {
  // Fixed argument order keeps the result bitwise symmetric.
  const bool swap = std::tie(first.r, first.cx, first.cy) > std::tie(second.r, second.cx, second.cy);
  const Circle& a = swap ? second : first;
  const Circle& b = swap ? first : second;
  const double d = distance(a.center(), b.center());
  if (d >= a.r + b.r) return 0.0;
  if (d <= std::abs(a.r - b.r)) {
    const double r = std::min(a.r, b.r);
    return std::numbers::pi * r * r;
  }
  const double ca = std::clamp((d * d + a.r * a.r - b.r * b.r) / (2.0 * d * a.r), -1.0, 1.0);
  const double cb = std::clamp((d * d + b.r * b.r - a.r * a.r) / (2.0 * d * b.r), -1.0, 1.0);
  const double k = (-d + a.r + b.r) * (d + a.r - b.r) * (d - a.r + b.r) * (d + a.r + b.r);
  return a.r * a.r * std::acos(ca) + b.r * b.r * std::acos(cb) - 0.5 * std::sqrt(std::max(k, 0.0));
}

double circle_iou(const Circle& a, const Circle& b) {
  if (a == b) return 1.0;
  const double inter = circle_intersection_area(a, b);
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? std::clamp(inter / uni, 0.0, 1.0) : 0.0;
}

Mask rasterize(const Contour& contour, int height, int width) {
  Mask mask(height, width);
  const std::size_t m = contour.size();
  if (m < 3 || height <= 0 || width <= 0) return mask;

  double ymin = contour[0].y, ymax = contour[0].y;
  for (const Point& p : contour) {
    ymin = std::min(ymin, p.y);
    ymax = std::max(ymax, p.y);
  }
  const int row_lo = std::max(0, static_cast<int>(std::floor(ymin - 0.5)));
  const int row_hi = std::min(height - 1, static_cast<int>(std::ceil(ymax - 0.5)));

  std::vector<double> crossings;
  for (int row = row_lo; row <= row_hi; ++row) {
    const double y = row + 0.5;
    crossings.clear();
    for (std::size_t e = 0; e < m; ++e) {
      const Point a = contour[e];
      const Point b = contour[(e + 1) % m];
      if ((a.y > y) != (b.y > y)) {
        crossings.push_back(a.x + (y - a.y) * (b.x - a.x) / (b.y - a.y));
      }
    }
    std::sort(crossings.begin(), crossings.end());
    for (std::size_t k = 0; k + 1 < crossings.size(); k += 2) {
      // Pixel center j + 0.5 strictly inside (x0, x1).
      const int col_lo = std::max(0, static_cast<int>(std::floor(crossings[k] - 0.5)) + 1);
      const int col_hi =
          std::min(width - 1, static_cast<int>(std::ceil(crossings[k + 1] - 0.5)) - 1);
      for (int col = col_lo; col <= col_hi; ++col) mask.set(row, col);
    }
  }
  return mask;
}

namespace {

struct OverlapCounts {
  std::size_t a = 0, b = 0, both = 0;
};

OverlapCounts count_overlap(const Mask& a, const Mask& b, const char* what) {
  if (a.height() != b.height() || a.width() != b.width()) {
    throw InvalidInput(std::string(what) + ": mask shapes differ (" +
                       std::to_string(a.height()) + "x" + std::to_string(a.width()) + " vs " +
                       std::to_string(b.height()) + "x" + std::to_string(b.width()) + ")");
  }
  OverlapCounts c;
  const auto& da = a.data();
  const auto& db = b.data();
  for (std::size_t i = 0; i < da.size(); ++i) {
    c.a += da[i];
    c.b += db[i];
    c.both += da[i] & db[i];
  }
  return c;
}

}  // namespace

double dice(const Mask& a, const Mask& b) {
  const OverlapCounts c = count_overlap(a, b, "dice");
  if (c.a + c.b == 0) return 1.0;
  return 2.0 * static_cast<double>(c.both) / static_cast<double>(c.a + c.b);
}

double mask_iou(const Mask& a, const Mask& b) {
  const OverlapCounts c = count_overlap(a, b, "mask_iou");
  const std::size_t uni = c.a + c.b - c.both;
  if (uni == 0) return 1.0;
  return static_cast<double>(c.both) / static_cast<double>(uni);
}

}  // namespace circlesnake::geometry
