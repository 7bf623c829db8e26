#include "circlesnake/evaluation.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include "circlesnake/error.hpp"

namespace circlesnake::evaluation {

using nlohmann::json;

GroundTruthImage ground_truth_of(const data::Sample& sample) {
  return {sample.id, sample.image.height, sample.image.width, sample.instances};
}

namespace {

struct ScoredFlag {
  double score;
  bool true_positive;
  bool ignored;
};

std::vector<std::size_t> score_order(const std::vector<double>& scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  if (order.size() > static_cast<std::size_t>(kMaxDetections)) order.resize(kMaxDetections);
  return order;
}

// Per-image COCO matching. GTs outside the area range are "ignored": they can
// absorb a prediction (which then does not count) but never count as misses.
std::vector<ScoredFlag> match_image(const MatchInput& in, double threshold, AreaRange range,
                                    std::vector<int>* matched_gt, int* valid_gts) {
  const std::size_t num_gt = in.gt_areas.size();
  std::vector<bool> gt_ignore(num_gt);
  for (std::size_t g = 0; g < num_gt; ++g) gt_ignore[g] = !range.contains(in.gt_areas[g]);
  std::vector<std::size_t> gt_order(num_gt);
  std::iota(gt_order.begin(), gt_order.end(), std::size_t{0});
  std::stable_sort(gt_order.begin(), gt_order.end(),
                   [&](std::size_t a, std::size_t b) { return !gt_ignore[a] && gt_ignore[b]; });
  *valid_gts = static_cast<int>(std::count(gt_ignore.begin(), gt_ignore.end(), false));

  std::vector<bool> gt_taken(num_gt, false);
  std::vector<ScoredFlag> flags;
  for (std::size_t d : score_order(in.pred_scores)) {
    double best = std::min(threshold, 1.0 - 1e-10);
    int m = -1;
    for (std::size_t g : gt_order) {
      if (gt_taken[g]) continue;
      if (m >= 0 && !gt_ignore[static_cast<std::size_t>(m)] && gt_ignore[g]) break;
      if (in.iou[d][g] < best) continue;
      best = in.iou[d][g];
      m = static_cast<int>(g);
    }
    ScoredFlag f{in.pred_scores[d], false, false};
    if (m >= 0) {
      gt_taken[static_cast<std::size_t>(m)] = true;
      f.true_positive = true;
      f.ignored = gt_ignore[static_cast<std::size_t>(m)];
    } else {
      f.ignored = !range.contains(in.pred_areas[d]);
    }
    if (matched_gt) matched_gt->push_back(m);
    flags.push_back(f);
  }
  return flags;
}

}  // namespace

std::vector<int> greedy_match(const MatchInput& input, double iou_threshold) {
  std::vector<int> matched;
  int valid = 0;
  match_image(input, iou_threshold, kAllAreas, &matched, &valid);
  return matched;
}

ApResult average_precision(std::span<const MatchInput> images, double iou_threshold,
                           AreaRange range) {
  std::vector<ScoredFlag> all;
  long long total_gt = 0;
  for (const MatchInput& in : images) {
    if (in.iou.size() != in.pred_scores.size() || in.pred_areas.size() != in.pred_scores.size()) {
      throw InvalidInput("average_precision: prediction arrays are misaligned");
    }
    for (const auto& row : in.iou) {
      if (row.size() != in.gt_areas.size()) {
        throw InvalidInput("average_precision: IoU matrix does not match ground truth count");
      }
    }
    int valid = 0;
    auto flags = match_image(in, iou_threshold, range, nullptr, &valid);
    total_gt += valid;
    all.insert(all.end(), flags.begin(), flags.end());
  }

  ApResult result;
  result.precision.assign(kRecallPoints, 0.0);
  if (total_gt == 0) return result;

  std::stable_sort(all.begin(), all.end(),
                   [](const ScoredFlag& a, const ScoredFlag& b) { return a.score > b.score; });
  std::vector<double> recall, precision;
  long long tp = 0, fp = 0;
  for (const ScoredFlag& f : all) {
    if (f.ignored) continue;
    (f.true_positive ? tp : fp) += 1;
    recall.push_back(static_cast<double>(tp) / static_cast<double>(total_gt));
    precision.push_back(static_cast<double>(tp) / static_cast<double>(tp + fp));
  }
  for (std::size_t i = precision.size(); i-- > 1;) {
    precision[i - 1] = std::max(precision[i - 1], precision[i]);
  }
  double sum = 0.0;
  for (int k = 0; k < kRecallPoints; ++k) {
    const double r = static_cast<double>(k) / (kRecallPoints - 1);
    auto it = std::lower_bound(recall.begin(), recall.end(), r);
    const double p = it == recall.end() ? 0.0 : precision[static_cast<std::size_t>(it - recall.begin())];
    result.precision[static_cast<std::size_t>(k)] = p;
    sum += p;
  }
  result.ap = sum / kRecallPoints;
  return result;
}

namespace {

struct BoxedMask {
  geometry::Mask mask;
  int r0 = 0, r1 = -1, c0 = 0, c1 = -1;  // inclusive bounds of set pixels
  std::size_t area = 0;
};

BoxedMask boxed(geometry::Mask m) {
  BoxedMask b;
  b.r0 = m.height();
  b.c0 = m.width();
  for (int row = 0; row < m.height(); ++row) {
    for (int col = 0; col < m.width(); ++col) {
      if (!m.at(row, col)) continue;
      ++b.area;
      b.r0 = std::min(b.r0, row);
      b.r1 = std::max(b.r1, row);
      b.c0 = std::min(b.c0, col);
      b.c1 = std::max(b.c1, col);
    }
  }
  b.mask = std::move(m);
  return b;
}

std::size_t intersection(const BoxedMask& a, const BoxedMask& b) {
  const int r0 = std::max(a.r0, b.r0), r1 = std::min(a.r1, b.r1);
  const int c0 = std::max(a.c0, b.c0), c1 = std::min(a.c1, b.c1);
  std::size_t n = 0;
  for (int row = r0; row <= r1; ++row) {
    for (int col = c0; col <= c1; ++col) n += a.mask.at(row, col) & b.mask.at(row, col);
  }
  return n;
}

double boxed_iou(const BoxedMask& a, const BoxedMask& b) {
  const std::size_t inter = intersection(a, b);
  const std::size_t uni = a.area + b.area - inter;
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

double boxed_dice(const BoxedMask& a, const BoxedMask& b) {
  const std::size_t total = a.area + b.area;
  return total == 0 ? 1.0 : 2.0 * static_cast<double>(intersection(a, b)) / static_cast<double>(total);
}

std::set<int> classes_in(std::span<const ImagePrediction> preds,
                         std::span<const GroundTruthImage> gts) {
  std::set<int> classes;
  for (const auto& im : gts) for (const auto& g : im.instances) classes.insert(g.class_id);
  for (const auto& im : preds) for (const auto& p : im.instances) classes.insert(p.class_id);
  return classes;
}

void check_alignment(std::span<const ImagePrediction> preds, std::span<const GroundTruthImage> gts) {
  if (preds.size() != gts.size()) {
    throw InvalidInput("evaluation: " + std::to_string(preds.size()) + " prediction images vs " +
                       std::to_string(gts.size()) + " ground-truth images");
  }
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i].image_id != gts[i].image_id) {
      throw InvalidInput("evaluation: image order mismatch at " + std::to_string(i) + " ('" +
                         preds[i].image_id + "' vs '" + gts[i].image_id + "')");
    }
  }
}

// Per-class matching inputs for every image; `iou` and areas come from the
// caller so both detection and segmentation share the AP bookkeeping.
struct ClassInputs {
  int class_id;
  std::vector<MatchInput> images;
  std::vector<std::vector<std::size_t>> pred_index;  // back-references into the image lists
  std::vector<std::vector<std::size_t>> gt_index;
};

template <class IouFn, class PredArea, class GtArea>
std::vector<ClassInputs> build_inputs(std::span<const ImagePrediction> preds,
                                      std::span<const GroundTruthImage> gts, IouFn iou,
                                      PredArea pred_area, GtArea gt_area) {
  std::vector<ClassInputs> out;
  for (int cls : classes_in(preds, gts)) {
    ClassInputs ci{cls, {}, {}, {}};
    for (std::size_t i = 0; i < preds.size(); ++i) {
      MatchInput in;
      std::vector<std::size_t> pi, gi;
      for (std::size_t g = 0; g < gts[i].instances.size(); ++g) {
        if (gts[i].instances[g].class_id != cls) continue;
        gi.push_back(g);
        in.gt_areas.push_back(gt_area(i, g));
      }
      for (std::size_t p = 0; p < preds[i].instances.size(); ++p) {
        if (preds[i].instances[p].class_id != cls) continue;
        pi.push_back(p);
        in.pred_scores.push_back(preds[i].instances[p].score);
        in.pred_areas.push_back(pred_area(i, p));
        auto& row = in.iou.emplace_back();
        for (std::size_t g : gi) row.push_back(iou(i, p, g));
      }
      ci.images.push_back(std::move(in));
      ci.pred_index.push_back(std::move(pi));
      ci.gt_index.push_back(std::move(gi));
    }
    out.push_back(std::move(ci));
  }
  return out;
}

std::optional<double> mean_defined(const std::vector<std::optional<double>>& values) {
  double sum = 0.0;
  int n = 0;
  for (const auto& v : values) {
    if (v) {
      sum += *v;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / n;
}

void fill_ap(EvalReport& report, const std::vector<ClassInputs>& classes) {
  std::vector<std::optional<double>> ap_cls, ap50_cls, ap75_cls, aps_cls, apm_cls;
  std::vector<double> pr50(kRecallPoints, 0.0), pr75(kRecallPoints, 0.0);
  int curve_classes = 0;
  for (const ClassInputs& ci : classes) {
    std::vector<std::optional<double>> per_thr;
    for (int k = 0; k < 10; ++k) {
      const double thr = 0.5 + 0.05 * k;
      ApResult r = average_precision(ci.images, thr);
      if (k == 0 && r.ap) {
        ++curve_classes;
        for (int q = 0; q < kRecallPoints; ++q) pr50[static_cast<std::size_t>(q)] += r.precision[static_cast<std::size_t>(q)];
      }
      if (k == 5 && r.ap) {
        for (int q = 0; q < kRecallPoints; ++q) pr75[static_cast<std::size_t>(q)] += r.precision[static_cast<std::size_t>(q)];
      }
      if (k == 0) ap50_cls.push_back(r.ap);
      if (k == 5) ap75_cls.push_back(r.ap);
      per_thr.push_back(r.ap);
    }
    ap_cls.push_back(mean_defined(per_thr));
    std::vector<std::optional<double>> small, medium;
    for (int k = 0; k < 10; ++k) {
      const double thr = 0.5 + 0.05 * k;
      small.push_back(average_precision(ci.images, thr, kSmallAreas).ap);
      medium.push_back(average_precision(ci.images, thr, kMediumAreas).ap);
    }
    aps_cls.push_back(mean_defined(small));
    apm_cls.push_back(mean_defined(medium));
  }
  report.ap = mean_defined(ap_cls);
  report.ap50 = mean_defined(ap50_cls);
  report.ap75 = mean_defined(ap75_cls);
  report.ap_s = mean_defined(aps_cls);
  report.ap_m = mean_defined(apm_cls);
  if (curve_classes > 0) {
    for (double& v : pr50) v /= curve_classes;
    for (double& v : pr75) v /= curve_classes;
  }
  report.pr50 = std::move(pr50);
  report.pr75 = std::move(pr75);
}

}  // namespace

EvalReport evaluate_detection(std::span<const ImagePrediction> predictions,
                              std::span<const GroundTruthImage> ground_truth) {
  check_alignment(predictions, ground_truth);
  std::vector<std::vector<double>> gt_area(ground_truth.size());
  for (std::size_t i = 0; i < ground_truth.size(); ++i) {
    for (const auto& g : ground_truth[i].instances) {
      gt_area[i].push_back(static_cast<double>(
          geometry::rasterize(g.boundary, ground_truth[i].height, ground_truth[i].width).count()));
    }
  }
  auto classes = build_inputs(
      predictions, ground_truth,
      [&](std::size_t i, std::size_t p, std::size_t g) {
        return geometry::circle_iou(predictions[i].instances[p].circle,
                                    ground_truth[i].instances[g].circle);
      },
      [&](std::size_t i, std::size_t p) { return predictions[i].instances[p].circle.area(); },
      [&](std::size_t i, std::size_t g) { return gt_area[i][g]; });

  EvalReport report;
  report.kind = "detection";
  fill_ap(report, classes);
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    report.per_image.push_back({ground_truth[i].image_id,
                                static_cast<int>(ground_truth[i].instances.size()),
                                static_cast<int>(predictions[i].instances.size()), {}});
  }
  return report;
}

EvalReport evaluate_segmentation(std::span<const ImagePrediction> predictions,
                                 std::span<const GroundTruthImage> ground_truth) {
  check_alignment(predictions, ground_truth);
  std::vector<std::vector<BoxedMask>> pm(predictions.size()), gm(ground_truth.size());
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const int h = ground_truth[i].height, w = ground_truth[i].width;
    for (const auto& p : predictions[i].instances) pm[i].push_back(boxed(geometry::rasterize(p.contour, h, w)));
    for (const auto& g : ground_truth[i].instances) gm[i].push_back(boxed(geometry::rasterize(g.boundary, h, w)));
  }
  auto classes = build_inputs(
      predictions, ground_truth,
      [&](std::size_t i, std::size_t p, std::size_t g) { return boxed_iou(pm[i][p], gm[i][g]); },
      [&](std::size_t i, std::size_t p) { return static_cast<double>(pm[i][p].area); },
      [&](std::size_t i, std::size_t g) { return static_cast<double>(gm[i][g].area); });

  EvalReport report;
  report.kind = "segmentation";
  fill_ap(report, classes);

  for (std::size_t i = 0; i < predictions.size(); ++i) {
    PerImageRecord rec{ground_truth[i].image_id, static_cast<int>(ground_truth[i].instances.size()),
                       static_cast<int>(predictions[i].instances.size()),
                       std::vector<double>(ground_truth[i].instances.size(), 0.0)};
    report.per_image.push_back(std::move(rec));
  }
  for (const ClassInputs& ci : classes) {
    for (std::size_t i = 0; i < ci.images.size(); ++i) {
      const std::vector<int> matched = greedy_match(ci.images[i], 0.5);
      const std::vector<std::size_t> order = score_order(ci.images[i].pred_scores);
      for (std::size_t k = 0; k < matched.size(); ++k) {
        if (matched[k] < 0) continue;
        const std::size_t p = ci.pred_index[i][order[k]];
        const std::size_t g = ci.gt_index[i][static_cast<std::size_t>(matched[k])];
        report.per_image[i].gt_dice[g] = boxed_dice(pm[i][p], gm[i][g]);
      }
    }
  }
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& rec : report.per_image) {
    for (double d : rec.gt_dice) {
      sum += d;
      ++n;
    }
  }
  if (n > 0) report.dice_mean = sum / static_cast<double>(n);
  return report;
}

std::vector<ImagePrediction> as_circle_proposals(std::span<const ImagePrediction> predictions,
                                                 int vertices) {
  std::vector<ImagePrediction> out(predictions.begin(), predictions.end());
  for (auto& im : out) {
    for (auto& p : im.instances) p.contour = geometry::sample_circle_contour(p.circle, vertices);
  }
  return out;
}

namespace {

json optional_json(const std::optional<double>& v) {
  return v ? json(*v) : json("n/a");
}

std::optional<double> optional_from(const json& j) {
  if (j.is_number()) return j.get<double>();
  return std::nullopt;
}

}  // namespace

json to_json(const EvalReport& r) {
  json per_image = json::array();
  for (const auto& rec : r.per_image) {
    json e = {{"image_id", rec.image_id}, {"num_gt", rec.num_gt}, {"num_pred", rec.num_pred}};
    if (r.kind == "segmentation") e["gt_dice"] = rec.gt_dice;
    per_image.push_back(std::move(e));
  }
  return {{"kind", r.kind},
          {"ap", optional_json(r.ap)},
          {"ap50", optional_json(r.ap50)},
          {"ap75", optional_json(r.ap75)},
          {"ap_s", optional_json(r.ap_s)},
          {"ap_m", optional_json(r.ap_m)},
          {"dice_mean", optional_json(r.dice_mean)},
          {"pr50", r.pr50},
          {"pr75", r.pr75},
          {"per_image", per_image},
          {"config", r.config},
          {"config_hash", r.config_hash}};
}

EvalReport report_from_json(const json& j) {
  EvalReport r;
  r.kind = j.at("kind").get<std::string>();
  r.ap = optional_from(j.at("ap"));
  r.ap50 = optional_from(j.at("ap50"));
  r.ap75 = optional_from(j.at("ap75"));
  r.ap_s = optional_from(j.at("ap_s"));
  r.ap_m = optional_from(j.at("ap_m"));
  r.dice_mean = optional_from(j.at("dice_mean"));
  r.pr50 = j.value("pr50", std::vector<double>{});
  r.pr75 = j.value("pr75", std::vector<double>{});
  for (const auto& e : j.value("per_image", json::array())) {
    PerImageRecord rec;
    rec.image_id = e.at("image_id").get<std::string>();
    rec.num_gt = e.at("num_gt").get<int>();
    rec.num_pred = e.at("num_pred").get<int>();
    rec.gt_dice = e.value("gt_dice", std::vector<double>{});
    r.per_image.push_back(std::move(rec));
  }
  r.config = j.value("config", json::object());
  r.config_hash = j.value("config_hash", std::string{});
  return r;
}

}  // namespace circlesnake::evaluation
