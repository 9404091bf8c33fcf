#pragma once

/// @file pose_pruning.hpp
/// Area-ratio pose scoring. Each view's mask area is divided by the largest
/// view area of the same category; views below the threshold are considered
/// physically unstable and dropped from synthesis.

#include <map>
#include <span>
#include <vector>

#include "priming/core.hpp"

namespace priming {

struct PoseRecord {
  CategoryId category;
  int view = 0;
  double area = 0.0;
  double ratio = 0.0;
  bool realistic = false;

  friend bool operator==(const PoseRecord&, const PoseRecord&) = default;
};

struct PruneConfig {
  double theta_m = 0.45;

  void validate() const {
    if (!(theta_m >= 0.0 && theta_m <= 1.0)) throw ValidationError("theta_m must lie in [0, 1]");
  }
};

/// area / max(area) for the views of one category.
inline std::vector<double> pose_ratios(std::span<const double> areas) {
  if (areas.empty()) throw ValidationError("pose_ratios: no views");
  double peak = 0.0;
  for (double a : areas) {
    if (!(a >= 0.0)) throw ValidationError("pose_ratios: negative or NaN area");
    peak = std::max(peak, a);
  }
  if (peak <= 0.0) throw ValidationError("pose_ratios: all areas are zero");
  std::vector<double> out;
  out.reserve(areas.size());
  for (double a : areas) out.push_back(a == peak ? 1.0 : a / peak);
  return out;
}

/// Fills `ratio` for every record, grouping by category.
inline void score_poses(std::vector<PoseRecord>& records) {
  std::map<CategoryId, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < records.size(); ++i) groups[records[i].category].push_back(i);
  for (const auto& [cat, idx] : groups) {
    std::vector<double> areas;
    areas.reserve(idx.size());
    for (auto i : idx) areas.push_back(records[i].area);
    const auto r = pose_ratios(areas);
    for (std::size_t j = 0; j < idx.size(); ++j) records[idx[j]].ratio = r[j];
  }
}

struct PruneResult {
  std::vector<PoseRecord> kept;
  std::vector<PoseRecord> pruned;
};

/// Keeps records with ratio >= theta_m (a ratio exactly at the threshold is
/// realistic). Input order is preserved within each output set.
inline PruneResult prune_poses(std::span<const PoseRecord> records, const PruneConfig& cfg = {}) {
  cfg.validate();
  PruneResult out;
  for (PoseRecord r : records) {
    r.realistic = r.ratio >= cfg.theta_m;
    (r.realistic ? out.kept : out.pruned).push_back(r);
  }
  return out;
}

}  // namespace priming
