#pragma once

// COCO-style average precision (greedy score-ordered matching, 101-point
// interpolation), Dice over matched instances, and rotation consistency.

#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "circlesnake/data.hpp"
#include "circlesnake/encoding.hpp"
#include "circlesnake/geometry.hpp"
#include "json.hpp"

namespace circlesnake::evaluation {

struct PredictedInstance {
  geometry::Circle circle;
  geometry::Contour contour;
  int class_id = 0;
  double score = 0.0;
};

struct ImagePrediction {
  std::string image_id;
  int height = 0;
  int width = 0;
  std::vector<PredictedInstance> instances;
};

struct GroundTruthImage {
  std::string image_id;
  int height = 0;
  int width = 0;
  std::vector<encoding::InstanceRecord> instances;
};

GroundTruthImage ground_truth_of(const data::Sample& sample);

/// Half-open area interval [lo, hi) in square pixels.
struct AreaRange {
  double lo = 0.0;
  double hi = std::numeric_limits<double>::infinity();
  bool contains(double area) const { return area >= lo && area < hi; }
};

inline constexpr double kSmallAreaLimit = 32.0 * 32.0;
inline constexpr AreaRange kAllAreas{};
inline constexpr AreaRange kSmallAreas{0.0, kSmallAreaLimit};
/// An area of exactly 32^2 counts as medium.
inline constexpr AreaRange kMediumAreas{kSmallAreaLimit, std::numeric_limits<double>::infinity()};

/// Matching problem for one image and one class.
struct MatchInput {
  std::vector<double> pred_scores;
  std::vector<double> pred_areas;
  std::vector<double> gt_areas;
  std::vector<std::vector<double>> iou;  // [pred][gt]
};

struct ApResult {
  std::optional<double> ap;        // empty when no ground truth is in range
  std::vector<double> precision;   // interpolated precision at recall 0, 0.01, ..., 1
};

inline constexpr int kMaxDetections = 100;
inline constexpr int kRecallPoints = 101;

ApResult average_precision(std::span<const MatchInput> images, double iou_threshold,
                           AreaRange range = kAllAreas);

/// Convenience form over per-image prediction and ground-truth lists. Each
/// prediction exposes `.score`; iou_fn(pred, gt) gives their overlap.
template <class Pred, class Gt, class IouFn>
std::optional<double> average_precision(const std::vector<std::vector<Pred>>& preds,
                                        const std::vector<std::vector<Gt>>& gts, IouFn iou_fn,
                                        double iou_threshold) {
  std::vector<MatchInput> inputs(preds.size());
  for (std::size_t i = 0; i < preds.size(); ++i) {
    MatchInput& in = inputs[i];
    for (const auto& p : preds[i]) {
      in.pred_scores.push_back(p.score);
      in.pred_areas.push_back(0.0);
      auto& row = in.iou.emplace_back();
      for (const auto& g : gts[i]) row.push_back(iou_fn(p, g));
    }
    in.gt_areas.assign(gts[i].size(), 0.0);
  }
  return average_precision(inputs, iou_threshold).ap;
}

/// Greedy matching at one threshold: for every prediction (descending score)
/// the index of the matched ground truth, or -1.
std::vector<int> greedy_match(const MatchInput& input, double iou_threshold);

struct PerImageRecord {
  std::string image_id;
  int num_gt = 0;
  int num_pred = 0;
  std::vector<double> gt_dice;  // segmentation only: Dice of each GT's match, 0 if unmatched
};

struct EvalReport {
  std::string kind;  // "detection" or "segmentation"
  std::optional<double> ap, ap50, ap75, ap_s, ap_m;
  std::optional<double> dice_mean;
  std::vector<double> pr50;  // interpolated precision curves
  std::vector<double> pr75;
  std::vector<PerImageRecord> per_image;
  nlohmann::json config = nlohmann::json::object();
  std::string config_hash;
};

nlohmann::json to_json(const EvalReport& report);
EvalReport report_from_json(const nlohmann::json& j);

/// Circle IoU; AP_S / AP_M bucket by ground-truth mask area.
EvalReport evaluate_detection(std::span<const ImagePrediction> predictions,
                              std::span<const GroundTruthImage> ground_truth);

/// Mask IoU on rasterized contours; dice_mean averages over every ground
/// truth, with a GT unmatched at IoU 0.5 contributing 0.
EvalReport evaluate_segmentation(std::span<const ImagePrediction> predictions,
                                 std::span<const GroundTruthImage> ground_truth);

/// Circle contours in place of the predicted contours.
std::vector<ImagePrediction> as_circle_proposals(std::span<const ImagePrediction> predictions,
                                                 int vertices);

// ---------------------------------------------------------------------------
// Rotation consistency

using Predictor = std::function<ImagePrediction(const data::Sample&)>;

struct ConsistencyOptions {
  std::vector<int> angles{90, 180, 270};
  double match_iou = 0.5;
  /// Compare circles analytically instead of rasterized contours.
  bool circles_only = false;
};

/// Map predictions made on an image rotated by `degrees` back into the
/// original frame of an orig_height×orig_width image.
ImagePrediction unrotate(const ImagePrediction& rotated, int degrees, int orig_height,
                         int orig_width);

/// Matched-Dice agreement of two prediction sets on the same image: sum of
/// matched Dice over (matched + unmatched on either side). Both empty gives 1.
double prediction_agreement(const ImagePrediction& reference, const ImagePrediction& other,
                            const ConsistencyOptions& options);

/// Mean agreement between predictions on each sample and predictions on its
/// rotated copies mapped back.
double rotation_consistency(const Predictor& predictor, std::span<const data::Sample> samples,
                            const ConsistencyOptions& options = {});

}  // namespace circlesnake::evaluation
