#pragma once

/// @file loss.hpp
/// Joint counting + detection objective with analytic gradients:
///
///   L = 1/(2N) * sum_i [ sum_l (D^_i(l) - D_i(l))^2
///                        + lambda * sum_d ( CE(s_d, p_d) + [p_d > 0] * SmoothL1(t^_d - t_d) ) ]
///
/// Boxes are regressed in the usual anchor-relative parameterisation
/// t = ((cx - cx_a)/w_a, (cy - cy_a)/h_a, ln(w/w_a), ln(h/h_a)).

#include <array>
#include <cmath>
#include <span>
#include <vector>

#include "priming/core.hpp"
#include "priming/density_map.hpp"

namespace priming {

using BoxDeltas = std::array<double, 4>;

struct DetectionTarget {
  CategoryId label;  // 0 = background
  BoxDeltas deltas{};
};

struct DetectionPrediction {
  std::vector<double> class_scores;  // K + 1 logits, index 0 = background
  BoxDeltas deltas{};
};

struct LossBreakdown {
  double density_term = 0.0;
  double cls_term = 0.0;
  double reg_term = 0.0;
  double total = 0.0;
  double lambda = 1.0;
};

template <typename Grad>
struct LossValue {
  double value = 0.0;
  Grad gradient;
};

/// 0.5 * sum (pred - gt)^2; gradient w.r.t. pred is (pred - gt).
inline LossValue<std::vector<double>> density_loss(const DensityMap& pred, const DensityMap& gt) {
  if (pred.width != gt.width || pred.height != gt.height) throw ValidationError("density_loss: dimension mismatch");
  LossValue<std::vector<double>> out;
  out.gradient.resize(pred.values.size());
  for (std::size_t i = 0; i < pred.values.size(); ++i) {
    const double d = pred.values[i] - gt.values[i];
    out.value += 0.5 * d * d;
    out.gradient[i] = d;
  }
  return out;
}

/// Softmax cross-entropy; gradient w.r.t. the logits is softmax - onehot.
inline LossValue<std::vector<double>> classification_loss(std::span<const double> scores, CategoryId label) {
  if (label.value < 0 || static_cast<std::size_t>(label.value) >= scores.size())
    throw ValidationError("classification_loss: label out of range");
  double peak = scores[0];
  for (double s : scores) peak = std::max(peak, s);
  double z = 0.0;
  for (double s : scores) z += std::exp(s - peak);
  const double log_z = peak + std::log(z);

  LossValue<std::vector<double>> out;
  out.value = log_z - scores[static_cast<std::size_t>(label.value)];
  out.gradient.resize(scores.size());
  for (std::size_t k = 0; k < scores.size(); ++k) out.gradient[k] = std::exp(scores[k] - log_z);
  out.gradient[static_cast<std::size_t>(label.value)] -= 1.0;
  return out;
}

inline LossValue<std::vector<double>> classification_loss(const DetectionPrediction& pred,
                                                          const DetectionTarget& target) {
  return classification_loss(pred.class_scores, target.label);
}

/// Smooth-L1 with its transition at |x| = 1, summed over the four deltas.
inline LossValue<BoxDeltas> regression_loss(const BoxDeltas& pred, const BoxDeltas& target) {
  LossValue<BoxDeltas> out{};
  for (std::size_t j = 0; j < 4; ++j) {
    const double x = pred[j] - target[j];
    if (std::abs(x) < 1.0) {
      out.value += 0.5 * x * x;
      out.gradient[j] = x;
    } else {
      out.value += std::abs(x) - 0.5;
      out.gradient[j] = x > 0 ? 1.0 : -1.0;
    }
  }
  return out;
}

inline BoxDeltas encode_box(const BBox& box, const BBox& anchor) {
  if (!(anchor.width() > 0 && anchor.height() > 0)) throw ValidationError("encode_box: anchor must have positive size");
  if (!(box.width() > 0 && box.height() > 0)) throw ValidationError("encode_box: box must have positive size");
  return {(box.center_x() - anchor.center_x()) / anchor.width(), (box.center_y() - anchor.center_y()) / anchor.height(),
          std::log(box.width() / anchor.width()), std::log(box.height() / anchor.height())};
}

inline BBox decode_box(const BoxDeltas& t, const BBox& anchor) {
  if (!(anchor.width() > 0 && anchor.height() > 0)) throw ValidationError("decode_box: anchor must have positive size");
  const double cx = anchor.center_x() + t[0] * anchor.width();
  const double cy = anchor.center_y() + t[1] * anchor.height();
  const double w = anchor.width() * std::exp(t[2]);
  const double h = anchor.height() * std::exp(t[3]);
  return {cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h};
}

/// One image of a training batch: predicted and target density maps plus
/// pre-matched detection (prediction, target) pairs.
struct ImageLossInput {
  DensityMap pred_density;
  DensityMap gt_density;
  std::vector<std::pair<DetectionPrediction, DetectionTarget>> detections;
};

inline LossBreakdown total_loss(std::span<const ImageLossInput> batch, double lambda = 1.0) {
  if (batch.empty()) throw ValidationError("total_loss: empty batch");
  LossBreakdown out;
  out.lambda = lambda;
  for (const auto& img : batch) {
    // density_loss already carries the 1/2.
    out.density_term += density_loss(img.pred_density, img.gt_density).value;
    for (const auto& [pred, target] : img.detections) {
      out.cls_term += 0.5 * classification_loss(pred, target).value;
      if (target.label.value > 0) out.reg_term += 0.5 * regression_loss(pred.deltas, target.deltas).value;
    }
  }
  const double inv_n = 1.0 / double(batch.size());
  out.density_term *= inv_n;
  out.cls_term *= inv_n;
  out.reg_term *= inv_n;
  out.total = out.density_term + lambda * (out.cls_term + out.reg_term);
  return out;
}

}  // namespace priming
