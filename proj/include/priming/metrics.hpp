#pragma once

/// @file metrics.hpp
/// Checkout evaluation: per-category counting distance, checkout accuracy
/// (cAcc), average counting distance (ACD), mean category counting distance
/// (mCCD), mean category IoU of counts (mCIoU), and detection mAP at IoU 0.5
/// (mAP50) and averaged over IoU 0.50:0.05:0.95 (mmAP).
///
/// The category universe for mCCD/mCIoU defaults to every category present
/// in the ground truth or the predictions. Categories with no ground truth
/// anywhere are left out of the mCCD average, and categories whose summed
/// max-count is zero are left out of the mCIoU average.

#include <algorithm>
#include <map>
#include <numeric>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "priming/core.hpp"

namespace priming {

struct CountingDistance {
  std::map<CategoryId, int> per_category;
  int total = 0;
};

inline CountingDistance counting_distance(const ShoppingList& pred, const ShoppingList& gt) {
  CountingDistance out;
  std::set<CategoryId> cats;
  for (const auto& [c, n] : pred.counts()) cats.insert(c);
  for (const auto& [c, n] : gt.counts()) cats.insert(c);
  for (CategoryId c : cats) {
    const int d = std::abs(pred.count(c) - gt.count(c));
    out.per_category[c] = d;
    out.total += d;
  }
  return out;
}

namespace detail {

inline void check_pairs(std::span<const ShoppingList> preds, std::span<const ShoppingList> gts) {
  if (preds.size() != gts.size()) throw ValidationError("prediction and ground-truth lists differ in length");
  if (preds.empty()) throw ValidationError("no images to evaluate");
}

inline std::set<CategoryId> category_universe(std::span<const ShoppingList> preds, std::span<const ShoppingList> gts,
                                              std::span<const CategoryId> universe) {
  if (!universe.empty()) return {universe.begin(), universe.end()};
  std::set<CategoryId> cats;
  for (const auto& l : preds)
    for (const auto& [c, n] : l.counts()) cats.insert(c);
  for (const auto& l : gts)
    for (const auto& [c, n] : l.counts()) cats.insert(c);
  return cats;
}

}  // namespace detail

inline double checkout_accuracy(std::span<const ShoppingList> preds, std::span<const ShoppingList> gts) {
  detail::check_pairs(preds, gts);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < preds.size(); ++i)
    if (counting_distance(preds[i], gts[i]).total == 0) ++hits;
  return double(hits) / double(preds.size());
}

inline double acd(std::span<const ShoppingList> preds, std::span<const ShoppingList> gts) {
  detail::check_pairs(preds, gts);
  long sum = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) sum += counting_distance(preds[i], gts[i]).total;
  return double(sum) / double(preds.size());
}

inline double mccd(std::span<const ShoppingList> preds, std::span<const ShoppingList> gts,
                   std::span<const CategoryId> universe = {}) {
  detail::check_pairs(preds, gts);
  double acc = 0.0;
  int k = 0;
  for (CategoryId c : detail::category_universe(preds, gts, universe)) {
    long err = 0, total = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
      err += std::abs(preds[i].count(c) - gts[i].count(c));
      total += gts[i].count(c);
    }
    if (total == 0) continue;
    acc += double(err) / double(total);
    ++k;
  }
  return k == 0 ? 0.0 : acc / k;
}

inline double mciou(std::span<const ShoppingList> preds, std::span<const ShoppingList> gts,
                    std::span<const CategoryId> universe = {}) {
  detail::check_pairs(preds, gts);
  double acc = 0.0;
  int k = 0;
  for (CategoryId c : detail::category_universe(preds, gts, universe)) {
    long mn = 0, mx = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
      mn += std::min(preds[i].count(c), gts[i].count(c));
      mx += std::max(preds[i].count(c), gts[i].count(c));
    }
    if (mx == 0) continue;
    acc += double(mn) / double(mx);
    ++k;
  }
  if (k == 0) throw ValidationError("mciou: every category has zero counts in both predictions and ground truth");
  return acc / k;
}

/// Counts detections with score strictly above `score_threshold` per category.
inline ShoppingList tally_from_detections(std::span<const Detection> detections, double score_threshold = 0.5) {
  ShoppingList out;
  for (const auto& d : detections)
    if (d.score > score_threshold) out.add(d.category);
  return out;
}

// --- Average precision ----------------------------------------------------

/// AP per category at one IoU threshold over a dataset. Detections are ranked
/// by descending score (ties by image order, then input order) and greedily
/// matched to the unmatched same-category ground-truth box with the highest
/// IoU >= threshold in the same image. AP is the area under the monotone
/// precision envelope. Categories without ground truth are omitted.
inline std::map<CategoryId, double> average_precision(std::span<const std::vector<Detection>> detections,
                                                      std::span<const std::vector<BoxAnnotation>> ground_truth,
                                                      double iou_threshold) {
  if (detections.size() != ground_truth.size())
    throw ValidationError("average_precision: detection and ground-truth image counts differ");

  std::map<CategoryId, std::size_t> gt_count;
  for (const auto& img : ground_truth)
    for (const auto& g : img) ++gt_count[g.category];

  struct Ranked {
    double score;
    std::size_t image, index;
  };
  std::map<CategoryId, std::vector<Ranked>> by_cat;
  for (std::size_t i = 0; i < detections.size(); ++i)
    for (std::size_t j = 0; j < detections[i].size(); ++j)
      by_cat[detections[i][j].category].push_back({detections[i][j].score, i, j});

  std::map<CategoryId, double> out;
  for (const auto& [cat, n_gt] : gt_count) {
    auto ranked = by_cat[cat];
    std::stable_sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) { return a.score > b.score; });

    std::vector<std::vector<char>> used(ground_truth.size());
    for (std::size_t i = 0; i < ground_truth.size(); ++i) used[i].assign(ground_truth[i].size(), 0);

    std::vector<double> precision, recall;
    std::size_t tp = 0, fp = 0;
    for (const auto& r : ranked) {
      const BBox& box = detections[r.image][r.index].box;
      double best = -1.0;
      std::size_t best_j = 0;
      const auto& gts = ground_truth[r.image];
      for (std::size_t j = 0; j < gts.size(); ++j) {
        if (gts[j].category != cat || used[r.image][j]) continue;
        const double v = iou(box, gts[j].box);
        if (v >= iou_threshold && v > best) {
          best = v;
          best_j = j;
        }
      }
      if (best >= 0.0) {
        used[r.image][best_j] = 1;
        ++tp;
      } else {
        ++fp;
      }
      precision.push_back(double(tp) / double(tp + fp));
      recall.push_back(double(tp) / double(n_gt));
    }

    // Monotone envelope from the right, then integrate over recall steps.
    for (std::size_t k = precision.size(); k-- > 1;) precision[k - 1] = std::max(precision[k - 1], precision[k]);
    double ap = 0.0, prev_r = 0.0;
    for (std::size_t k = 0; k < precision.size(); ++k) {
      ap += (recall[k] - prev_r) * precision[k];
      prev_r = recall[k];
    }
    out[cat] = std::clamp(ap, 0.0, 1.0);
  }
  return out;
}

inline double mean_ap(std::span<const std::vector<Detection>> detections,
                      std::span<const std::vector<BoxAnnotation>> ground_truth, double iou_threshold) {
  const auto ap = average_precision(detections, ground_truth, iou_threshold);
  if (ap.empty()) return 0.0;
  double s = 0.0;
  for (const auto& [c, v] : ap) s += v;
  return s / double(ap.size());
}

inline double map50(std::span<const std::vector<Detection>> detections,
                    std::span<const std::vector<BoxAnnotation>> ground_truth) {
  return mean_ap(detections, ground_truth, 0.5);
}

/// Mean over the ten IoU thresholds 0.50, 0.55, ..., 0.95.
inline double mmap(std::span<const std::vector<Detection>> detections,
                   std::span<const std::vector<BoxAnnotation>> ground_truth) {
  double s = 0.0;
  for (int t = 0; t < 10; ++t) s += mean_ap(detections, ground_truth, (10 + t) / 20.0);
  return s / 10.0;
}

// --- Dataset report -------------------------------------------------------

struct MetricValues {
  double cacc = 0.0;
  double acd = 0.0;
  double mccd = 0.0;
  double mciou = 0.0;
  double map50 = 0.0;
  double mmap = 0.0;
  std::size_t images = 0;
};

struct MetricsReport {
  MetricValues overall;
  std::map<std::string, MetricValues> per_level;
};

/// Everything needed to score one evaluated image.
struct EvalImage {
  ShoppingList predicted;
  ShoppingList ground_truth;
  std::vector<Detection> detections;
  std::vector<BoxAnnotation> gt_boxes;
  std::string level;
};

inline MetricValues evaluate_images(std::span<const EvalImage> images, std::span<const CategoryId> universe = {}) {
  MetricValues v;
  v.images = images.size();
  if (images.empty()) return v;
  std::vector<ShoppingList> preds, gts;
  std::vector<std::vector<Detection>> dets;
  std::vector<std::vector<BoxAnnotation>> boxes;
  for (const auto& im : images) {
    preds.push_back(im.predicted);
    gts.push_back(im.ground_truth);
    dets.push_back(im.detections);
    boxes.push_back(im.gt_boxes);
  }
  v.cacc = checkout_accuracy(preds, gts);
  v.acd = acd(preds, gts);
  v.mccd = mccd(preds, gts, universe);
  bool any_counts = false;
  for (std::size_t i = 0; i < preds.size() && !any_counts; ++i) any_counts = !preds[i].empty() || !gts[i].empty();
  v.mciou = any_counts ? mciou(preds, gts, universe) : 1.0;
  v.map50 = map50(dets, boxes);
  v.mmap = mmap(dets, boxes);
  return v;
}

inline MetricsReport evaluate(std::span<const EvalImage> images, std::span<const CategoryId> universe = {}) {
  MetricsReport report;
  report.overall = evaluate_images(images, universe);
  std::map<std::string, std::vector<EvalImage>> groups;
  for (const auto& im : images)
    if (!im.level.empty()) groups[im.level].push_back(im);
  for (const auto& [level, imgs] : groups) report.per_level[level] = evaluate_images(imgs, universe);
  return report;
}

}  // namespace priming
