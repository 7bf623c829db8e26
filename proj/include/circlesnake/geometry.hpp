#pragma once

// Circle, contour and mask geometry.
//
// Coordinates follow the raster convention: x grows to the right, y grows
// downward, and pixel (row i, col j) covers [j, j+1) x [i, i+1) with its
// center at (j + 0.5, i + 0.5). "Top-most" means minimum y and "clockwise"
// means clockwise as seen on screen, which is a positive shoelace area in
// these coordinates.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace circlesnake::geometry {

struct Point {
  double x = 0.0;
  double y = 0.0;

  friend Point operator+(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }
  friend Point operator-(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }
  friend Point operator*(double s, Point p) { return {s * p.x, s * p.y}; }
  friend bool operator==(Point, Point) = default;
};

double distance(Point a, Point b);

struct Circle {
  double cx = 0.0;
  double cy = 0.0;
  double r = 0.0;

  Point center() const { return {cx, cy}; }
  double area() const;
  bool valid() const;
  friend bool operator==(const Circle&, const Circle&) = default;
};

/// Throws InvalidInput unless r > 0 and all fields are finite.
void validate(const Circle& c);

/// Closed ring of vertices; the last vertex connects back to the first.
class Contour {
 public:
  Contour() = default;
  explicit Contour(std::vector<Point> vertices) : vertices_(std::move(vertices)) {}

  std::size_t size() const noexcept { return vertices_.size(); }
  bool empty() const noexcept { return vertices_.empty(); }
  const Point& operator[](std::size_t i) const { return vertices_[i]; }
  Point& operator[](std::size_t i) { return vertices_[i]; }
  auto begin() const { return vertices_.begin(); }
  auto end() const { return vertices_.end(); }
  const std::vector<Point>& vertices() const noexcept { return vertices_; }

  double perimeter() const;
  /// Shoelace area; positive for clockwise (on-screen) rings.
  double signed_area() const;
  bool clockwise() const { return signed_area() > 0.0; }
  Contour translated(double dx, double dy) const;

  friend bool operator==(const Contour&, const Contour&) = default;

 private:
  std::vector<Point> vertices_;
};

/// Binary H×W grid, row-major, values in {0, 1}.
class Mask {
 public:
  Mask() = default;
  Mask(int height, int width)
      : height_(height), width_(width),
        data_(static_cast<std::size_t>(height) * width, 0) {}

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  std::uint8_t at(int row, int col) const { return data_[index(row, col)]; }
  void set(int row, int col, bool on = true) { data_[index(row, col)] = on ? 1 : 0; }
  std::size_t count() const;
  const std::vector<std::uint8_t>& data() const noexcept { return data_; }

  friend bool operator==(const Mask&, const Mask&) = default;

 private:
  std::size_t index(int row, int col) const {
    return static_cast<std::size_t>(row) * width_ + col;
  }

  int height_ = 0;
  int width_ = 0;
  std::vector<std::uint8_t> data_;
};

/// n vertices at equal angular spacing, starting at the top-most point and
/// running clockwise.
Contour sample_circle_contour(const Circle& c, int n);

/// Resample a simple polygon to n vertices equally spaced by arc length,
/// clockwise, starting at the boundary point nearest `anchor` (ties go to the
/// lower edge index). Counter-clockwise input is walked in reverse.
Contour sample_boundary_contour(const Contour& polygon, int n, Point anchor);

double circle_intersection_area(const Circle& a, const Circle& b);
double circle_iou(const Circle& a, const Circle& b);

/// Pixel-center point-in-polygon with the even-odd rule. Centers lying
/// exactly on an edge are outside.
Mask rasterize(const Contour& contour, int height, int width);

/// Both-empty masks score 1.
double dice(const Mask& a, const Mask& b);
double mask_iou(const Mask& a, const Mask& b);

}  // namespace circlesnake::geometry
