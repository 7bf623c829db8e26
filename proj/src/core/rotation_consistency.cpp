#include <algorithm>
#include <numeric>

#include "circlesnake/error.hpp"
#include "circlesnake/evaluation.hpp"

namespace circlesnake::evaluation {

ImagePrediction unrotate(const ImagePrediction& rotated, int degrees, int orig_height,
                         int orig_width) {
  const int inverse = ((360 - degrees % 360) % 360 + 360) % 360;
  ImagePrediction out;
  out.image_id = rotated.image_id;
  out.height = orig_height;
  out.width = orig_width;
  for (const auto& p : rotated.instances) {
    PredictedInstance q = p;
    const geometry::Point c =
        data::rotate_point(p.circle.center(), inverse, rotated.height, rotated.width);
    q.circle = {c.x, c.y, p.circle.r};
    std::vector<geometry::Point> pts;
    pts.reserve(p.contour.size());
    for (const auto& v : p.contour) {
      pts.push_back(data::rotate_point(v, inverse, rotated.height, rotated.width));
    }
    q.contour = geometry::Contour(std::move(pts));
    out.instances.push_back(std::move(q));
  }
  return out;
}

double prediction_agreement(const ImagePrediction& reference, const ImagePrediction& other,
                            const ConsistencyOptions& options) {
  const std::size_t nr = reference.instances.size();
  const std::size_t no = other.instances.size();
  if (nr == 0 && no == 0) return 1.0;
  if (nr == 0 || no == 0) return 0.0;

  std::vector<geometry::Mask> rm, om;
  if (!options.circles_only) {
    const int h = reference.height, w = reference.width;
    for (const auto& p : reference.instances) rm.push_back(geometry::rasterize(p.contour, h, w));
    for (const auto& p : other.instances) om.push_back(geometry::rasterize(p.contour, h, w));
  }
  auto overlap = [&](std::size_t o, std::size_t r) {
    if (options.circles_only) {
      return geometry::circle_iou(other.instances[o].circle, reference.instances[r].circle);
    }
    return geometry::mask_iou(om[o], rm[r]);
  };
  auto agreement = [&](std::size_t o, std::size_t r) {
    if (options.circles_only) {
      const auto& a = other.instances[o].circle;
      const auto& b = reference.instances[r].circle;
      return 2.0 * geometry::circle_intersection_area(a, b) / (a.area() + b.area());
    }
    return geometry::dice(om[o], rm[r]);
  };

  std::vector<std::size_t> order(no);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return other.instances[a].score > other.instances[b].score;
  });
  std::vector<bool> taken(nr, false);
  double sum = 0.0;
  std::size_t matched = 0;
  for (std::size_t o : order) {
    double best = options.match_iou;
    int m = -1;
    for (std::size_t r = 0; r < nr; ++r) {
      if (taken[r] || other.instances[o].class_id != reference.instances[r].class_id) continue;
      const double iou = overlap(o, r);
      if (iou >= best) {
        best = iou;
        m = static_cast<int>(r);
      }
    }
    if (m < 0) continue;
    taken[static_cast<std::size_t>(m)] = true;
    sum += agreement(o, static_cast<std::size_t>(m));
    ++matched;
  }
  const std::size_t unmatched = (nr - matched) + (no - matched);
  return sum / static_cast<double>(matched + unmatched);
}

double rotation_consistency(const Predictor& predictor, std::span<const data::Sample> samples,
                            const ConsistencyOptions& options) {
  if (options.angles.empty()) throw InvalidInput("rotation_consistency: no angles given");
  double total = 0.0;
  std::size_t n = 0;
  for (const data::Sample& s : samples) {
    const ImagePrediction reference = predictor(s);
    for (int angle : options.angles) {
      const data::Sample rotated = data::rotate_sample(s, angle);
      const ImagePrediction back =
          unrotate(predictor(rotated), angle, s.image.height, s.image.width);
      total += prediction_agreement(reference, back, options);
      ++n;
    }
  }
  if (n == 0) throw InvalidInput("rotation_consistency: no samples");
  return total / static_cast<double>(n);
}

}  // namespace circlesnake::evaluation
