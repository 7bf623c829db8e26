#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include "circlesnake/data.hpp"
#include "circlesnake/error.hpp"

namespace circlesnake::data {

using geometry::Point;

namespace {

int normalize_quarter_turn(int degrees) {
  const int d = ((degrees % 360) + 360) % 360;
  if (d % 90 != 0) {
    throw InvalidInput("lossless rotation needs a multiple of 90 degrees, got " +
                       std::to_string(degrees));
  }
  return d;
}

}  // namespace

Point rotate_point(Point p, int degrees, int height, int width) {
  switch (normalize_quarter_turn(degrees)) {
    case 90: return {height - p.y, p.x};
    case 180: return {width - p.x, height - p.y};
    case 270: return {p.y, width - p.x};
    default: return p;
  }
}

Image rotate_image(const Image& in, int degrees) {
  const int d = normalize_quarter_turn(degrees);
  const int h = in.height, w = in.width;
  Image out = (d == 90 || d == 270) ? Image(w, h) : Image(h, w);
  for (int row = 0; row < out.height; ++row) {
    for (int col = 0; col < out.width; ++col) {
      int sr = row, sc = col;
      switch (d) {
        case 90: sr = h - 1 - col; sc = row; break;
        case 180: sr = h - 1 - row; sc = w - 1 - col; break;
        case 270: sr = col; sc = w - 1 - row; break;
        default: break;
      }
      for (int ch = 0; ch < 3; ++ch) out.at(row, col, ch) = in.at(sr, sc, ch);
    }
  }
  return out;
}

Sample rotate_sample(const Sample& sample, int degrees) {
  const int d = normalize_quarter_turn(degrees);
  const int h = sample.image.height, w = sample.image.width;
  if ((d == 90 || d == 270) && h != w) {
    throw InvalidInput("rotate_sample: " + std::to_string(d) + " degree rotation needs a square image, got " +
                       std::to_string(h) + "x" + std::to_string(w));
  }
  Sample out;
  out.id = sample.id;
  out.image = rotate_image(sample.image, d);
  for (const auto& inst : sample.instances) {
    encoding::InstanceRecord r;
    r.class_id = inst.class_id;
    std::vector<Point> pts;
    pts.reserve(inst.boundary.size());
    for (const Point& p : inst.boundary) pts.push_back(rotate_point(p, d, h, w));
    r.boundary = geometry::Contour(std::move(pts));
    const Point c = rotate_point(inst.circle.center(), d, h, w);
    r.circle = {c.x, c.y, inst.circle.r};
    out.instances.push_back(std::move(r));
  }
  return out;
}

Sample rotate_sample_bilinear(const Sample& sample, double degrees) {
  const Image& in = sample.image;
  const double theta = degrees * std::numbers::pi / 180.0;
  const double cs = std::cos(theta), sn = std::sin(theta);
  const double cx = in.width / 2.0, cy = in.height / 2.0;
  auto forward = [&](Point p) {
    const double dx = p.x - cx, dy = p.y - cy;
    return Point{cx + cs * dx - sn * dy, cy + sn * dx + cs * dy};
  };

  std::array<double, 3> fill{};
  for (std::size_t i = 0; i < in.pixels.size(); ++i) fill[i % 3] += in.pixels[i];
  for (double& f : fill) f /= std::max<std::size_t>(1, in.pixels.size() / 3);

  Sample out;
  out.id = sample.id;
  out.image = Image(in.height, in.width);
  for (int row = 0; row < in.height; ++row) {
    for (int col = 0; col < in.width; ++col) {
      const double qx = col + 0.5 - cx, qy = row + 0.5 - cy;
      // Inverse rotation, then shift to pixel-index space.
      const double sx = cx + cs * qx + sn * qy - 0.5;
      const double sy = cy - sn * qx + cs * qy - 0.5;
      const int x0 = static_cast<int>(std::floor(sx)), y0 = static_cast<int>(std::floor(sy));
      const double fx = sx - x0, fy = sy - y0;
      for (int ch = 0; ch < 3; ++ch) {
        auto px = [&](int r, int c) -> double {
          if (r < 0 || c < 0 || r >= in.height || c >= in.width) return fill[static_cast<std::size_t>(ch)];
          return in.at(r, c, ch);
        };
        const double v = (1 - fy) * ((1 - fx) * px(y0, x0) + fx * px(y0, x0 + 1)) +
                         fy * ((1 - fx) * px(y0 + 1, x0) + fx * px(y0 + 1, x0 + 1));
        out.image.at(row, col, ch) = static_cast<float>(v);
      }
    }
  }
  for (const auto& inst : sample.instances) {
    const Point c = forward(inst.circle.center());
    const double r = inst.circle.r;
    if (c.x - r < 0 || c.y - r < 0 || c.x + r > in.width || c.y + r > in.height) continue;
    encoding::InstanceRecord rec;
    rec.class_id = inst.class_id;
    std::vector<Point> pts;
    for (const Point& p : inst.boundary) pts.push_back(forward(p));
    rec.boundary = geometry::Contour(std::move(pts));
    rec.circle = {c.x, c.y, r};
    out.instances.push_back(std::move(rec));
  }
  return out;
}

}  // namespace circlesnake::data
