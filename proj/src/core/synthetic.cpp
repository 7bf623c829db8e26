// Synthetic stand-in for ball-shaped tissue objects: quasi-circular blobs with
// a dark rim and dotted interior over a stained, speckled background.

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "circlesnake/data.hpp"
#include "circlesnake/error.hpp"

namespace circlesnake::data {

using geometry::Circle;
using geometry::Contour;
using geometry::Point;

SynthConfig SynthConfig::for_size(int image_size) {
  SynthConfig cfg;
  cfg.image_size = image_size;
  const double scale = image_size / 512.0;
  cfg.min_radius = 16.0 * scale;
  cfg.max_radius = 96.0 * scale;
  return cfg;
}

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  double uniform(double lo, double hi) {
    return lo + (hi - lo) * (static_cast<double>(engine_() >> 11) * 0x1.0p-53);
  }
  int integer(int lo, int hi) {  // inclusive
    return lo + static_cast<int>(engine_() % static_cast<std::uint64_t>(hi - lo + 1));
  }

 private:
  std::mt19937_64 engine_;
};

struct Shape {
  Contour unit;  // clockwise, starts near the top
  double area_ratio = 1.0;
};

Shape make_shape(Rng& rng, const SynthConfig& cfg) {
  const int n = cfg.boundary_vertices;
  for (int attempt = 0;; ++attempt) {
    const double ecc = rng.uniform(1.0, std::max(1.0, cfg.max_eccentricity));
    const double phi = rng.uniform(0.0, std::numbers::pi);
    std::array<double, 3> amp{};
    std::array<double, 3> phase{};
    if (cfg.harmonics && cfg.harmonic_amplitude > 0.0) {
      const double total = rng.uniform(0.0, cfg.harmonic_amplitude);
      double wsum = 0.0;
      for (double& a : amp) wsum += (a = rng.uniform(0.0, 1.0));
      for (std::size_t k = 0; k < amp.size(); ++k) {
        amp[k] = wsum > 0.0 ? total * amp[k] / wsum : 0.0;
        phase[k] = rng.uniform(0.0, 2.0 * std::numbers::pi);
      }
    }
    const double a = ecc, b = 1.0;
    std::vector<Point> pts(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      const double theta = 2.0 * std::numbers::pi * i / n;
      double r = 1.0;
      if (ecc != 1.0) {
        const double psi = theta - phi;
        r = a * b / std::hypot(b * std::cos(psi), a * std::sin(psi));
      }
      double mod = 1.0;
      for (std::size_t k = 0; k < amp.size(); ++k) {
        mod += amp[k] * std::cos(static_cast<double>(k + 2) * theta + phase[k]);
      }
      r *= mod;
      pts[static_cast<std::size_t>(i)] = {r * std::sin(theta), -r * std::cos(theta)};
    }
    Contour shape(std::move(pts));
    const Circle mec = encoding::min_enclosing_circle(shape);
    const double ratio = shape.signed_area() / mec.area();
    // Keep a margin above 0.6 so the rasterized ratio stays in range too.
    if (ratio >= 0.62 || attempt >= 64) {
      std::vector<Point> centered(shape.vertices());
      for (Point& p : centered) p = (1.0 / mec.r) * (p - mec.center());
      return {Contour(std::move(centered)), ratio};
    }
  }
}

struct Palette {
  std::array<float, 3> background;
  std::array<float, 3> interior;
  std::array<float, 3> rim;
  std::array<float, 3> nucleus;
};

Palette make_palette(Rng& rng) {
  Palette p;
  const float tint = static_cast<float>(rng.uniform(-0.05, 0.05));
  p.background = {0.88f + tint, 0.76f + tint, 0.84f + tint};
  p.interior = {static_cast<float>(rng.uniform(0.62, 0.72)),
                static_cast<float>(rng.uniform(0.42, 0.52)),
                static_cast<float>(rng.uniform(0.66, 0.76))};
  p.rim = {0.38f, 0.24f, 0.46f};
  p.nucleus = {0.30f, 0.18f, 0.42f};
  return p;
}

void blend(Image& img, int row, int col, const std::array<float, 3>& color, float alpha) {
  for (int ch = 0; ch < 3; ++ch) {
    float& v = img.at(row, col, ch);
    v = (1.f - alpha) * v + alpha * color[static_cast<std::size_t>(ch)];
  }
}

void stamp_dot(Image& img, double cx, double cy, double radius,
               const std::array<float, 3>& color, float alpha) {
  const int r0 = std::max(0, static_cast<int>(std::floor(cy - radius - 1)));
  const int r1 = std::min(img.height - 1, static_cast<int>(std::ceil(cy + radius + 1)));
  const int c0 = std::max(0, static_cast<int>(std::floor(cx - radius - 1)));
  const int c1 = std::min(img.width - 1, static_cast<int>(std::ceil(cx + radius + 1)));
  for (int row = r0; row <= r1; ++row) {
    for (int col = c0; col <= c1; ++col) {
      if (std::hypot(col + 0.5 - cx, row + 0.5 - cy) <= radius) blend(img, row, col, color, alpha);
    }
  }
}

Contour scaled_about(const Contour& c, Point center, double factor) {
  std::vector<Point> pts(c.vertices());
  for (Point& p : pts) p = center + factor * (p - center);
  return Contour(std::move(pts));
}

}  // namespace

Sample generate_sample(std::uint64_t seed, int index, const SynthConfig& cfg) {
  if (cfg.image_size <= 0 || cfg.min_objects < 0 || cfg.max_objects < cfg.min_objects ||
      !(cfg.min_radius > 0.0) || cfg.max_radius < cfg.min_radius ||
      cfg.max_radius * 2.0 > cfg.image_size || cfg.boundary_vertices < 3 || cfg.num_classes < 1) {
    throw InvalidInput("generate_synthetic: inconsistent generator configuration");
  }
  Rng rng(splitmix(seed ^ splitmix(static_cast<std::uint64_t>(index) + 1)));
  const int size = cfg.image_size;

  Sample sample;
  sample.id = "synth_" + std::to_string(seed) + "_" + std::to_string(index);
  sample.image = Image(size, size);
  Image& img = sample.image;
  const Palette pal = make_palette(rng);

  // Stained background: low-frequency waves plus pixel noise.
  std::array<std::array<double, 4>, 3> waves{};
  for (auto& w : waves) {
    const double ang = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double freq = rng.uniform(0.5, 3.0) * 2.0 * std::numbers::pi / size;
    w = {freq * std::cos(ang), freq * std::sin(ang), rng.uniform(0.0, 6.3), rng.uniform(0.02, 0.05)};
  }
  for (int row = 0; row < size; ++row) {
    for (int col = 0; col < size; ++col) {
      double shade = 0.0;
      for (const auto& w : waves) shade += w[3] * std::sin(w[0] * col + w[1] * row + w[2]);
      for (int ch = 0; ch < 3; ++ch) {
        img.at(row, col, ch) = static_cast<float>(pal.background[static_cast<std::size_t>(ch)] +
                                                  shade + rng.uniform(-0.04, 0.04));
      }
    }
  }
  // Clutter: scattered nuclei and small faint patches.
  const int dots = static_cast<int>(size * size / 900.0 * rng.uniform(0.6, 1.4));
  for (int k = 0; k < dots; ++k) {
    stamp_dot(img, rng.uniform(0, size), rng.uniform(0, size), rng.uniform(1.0, 2.5), pal.nucleus,
              static_cast<float>(rng.uniform(0.3, 0.8)));
  }
  const int patches = rng.integer(2, 6);
  for (int k = 0; k < patches; ++k) {
    stamp_dot(img, rng.uniform(0, size), rng.uniform(0, size),
              rng.uniform(2.0, std::max(2.5, cfg.min_radius * 0.5)), pal.interior,
              static_cast<float>(rng.uniform(0.15, 0.35)));
  }

  // Objects: non-overlapping enclosing circles fully inside the image.
  const int wanted = rng.integer(cfg.min_objects, cfg.max_objects);
  std::vector<Circle> placed;
  for (int attempt = 0; static_cast<int>(placed.size()) < wanted && attempt < 400; ++attempt) {
    const double r = rng.uniform(cfg.min_radius, cfg.max_radius);
    const Circle c{rng.uniform(r + 1.0, size - r - 1.0), rng.uniform(r + 1.0, size - r - 1.0), r};
    bool clear = true;
    for (const Circle& o : placed) {
      if (geometry::distance(c.center(), o.center()) < c.r + o.r + 3.0) {
        clear = false;
        break;
      }
    }
    if (clear) placed.push_back(c);
  }

  for (const Circle& target : placed) {
    const Shape shape = make_shape(rng, cfg);
    std::vector<Point> pts(shape.unit.vertices());
    for (Point& p : pts) p = target.center() + target.r * p;
    encoding::InstanceRecord inst;
    inst.class_id = cfg.num_classes > 1 ? rng.integer(0, cfg.num_classes - 1) : 0;
    inst.boundary = Contour(std::move(pts));
    inst.circle = encoding::min_enclosing_circle(inst.boundary);

    const geometry::Mask inner = geometry::rasterize(inst.boundary, size, size);
    const Point center = inst.circle.center();
    const double rim_px = std::max(1.5, 0.04 * inst.circle.r);
    const geometry::Mask rim_out = geometry::rasterize(
        scaled_about(inst.boundary, center, 1.0 + rim_px / inst.circle.r), size, size);
    const geometry::Mask rim_in = geometry::rasterize(
        scaled_about(inst.boundary, center, 1.0 - rim_px / inst.circle.r), size, size);
    const float class_shift = 0.06f * static_cast<float>(inst.class_id);
    for (int row = 0; row < size; ++row) {
      for (int col = 0; col < size; ++col) {
        if (rim_out.at(row, col) && !rim_in.at(row, col)) {
          blend(img, row, col, pal.rim, 0.85f);
        } else if (inner.at(row, col)) {
          std::array<float, 3> col_in = pal.interior;
          col_in[0] += class_shift;
          blend(img, row, col, col_in, 0.8f);
          for (int ch = 0; ch < 3; ++ch) {
            img.at(row, col, ch) += static_cast<float>(rng.uniform(-0.05, 0.05));
          }
        }
      }
    }
    // Dense interior nuclei.
    const int nuclei = static_cast<int>(inst.circle.area() / 60.0);
    for (int k = 0; k < nuclei; ++k) {
      const double ang = rng.uniform(0.0, 2.0 * std::numbers::pi);
      const double rad = inst.circle.r * std::sqrt(rng.uniform(0.0, 1.0));
      const double x = center.x + rad * std::cos(ang);
      const double y = center.y + rad * std::sin(ang);
      const int pr = static_cast<int>(std::floor(y)), pc = static_cast<int>(std::floor(x));
      if (pr < 0 || pc < 0 || pr >= size || pc >= size || !rim_in.at(pr, pc)) continue;
      stamp_dot(img, x, y, rng.uniform(0.8, 1.8), pal.nucleus,
                static_cast<float>(rng.uniform(0.4, 0.8)));
    }
    sample.instances.push_back(std::move(inst));
  }

  for (float& v : img.pixels) v = std::round(std::clamp(v, 0.f, 1.f) * 255.f) / 255.f;
  return sample;
}

std::vector<Sample> generate_synthetic(std::uint64_t seed, int count, const SynthConfig& config) {
  if (count < 0) throw InvalidInput("generate_synthetic: negative count");
  std::vector<Sample> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) out.push_back(generate_sample(seed, i, config));
  return out;
}

}  // namespace circlesnake::data
