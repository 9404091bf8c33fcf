#pragma once

/// @file data_priming.hpp
/// Reliability-gated selection of unlabeled checkout images.
///
/// A test image is reliable when the rounded mass of the counter's density
/// map equals the number of post-NMS detections scoring strictly above
/// theta_p. Reliable images receive pseudo-labels from those same
/// detections and drive fine-tuning of the detector once the counter has
/// been dropped. Detector and Counter are interfaces; SimulatedDetector and
/// SimulatedCounter perturb ground truth under a configurable noise model so
/// the whole loop can be exercised without trained networks.

#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "priming/core.hpp"
#include "priming/density_map.hpp"
#include "priming/metrics.hpp"

namespace priming {

/// An unlabeled checkout image. The id keys deterministic model behaviour.
struct CheckoutImage {
  std::uint64_t id = 0;
  RgbImage image;
};

class Detector {
public:
  virtual ~Detector() = default;
  /// Raw (pre-NMS) detections.
  [[nodiscard]] virtual std::vector<Detection> detect(const CheckoutImage& image) const = 0;
  /// True when detect() may be called from several threads at once.
  [[nodiscard]] virtual bool concurrency_safe() const { return false; }
};

class Counter {
public:
  virtual ~Counter() = default;
  [[nodiscard]] virtual DensityMap count_map(const CheckoutImage& image) const = 0;
  [[nodiscard]] virtual bool concurrency_safe() const { return false; }
};

struct GateConfig {
  double theta_p = 0.95;
  double nms_iou = 0.5;

  void validate() const {
    if (!(theta_p >= 0.0 && theta_p <= 1.0)) throw ValidationError("theta_p must lie in [0, 1]");
    if (!(nms_iou >= 0.0 && nms_iou <= 1.0)) throw ValidationError("nms_iou must lie in [0, 1]");
  }
};

/// Class-wise greedy NMS. Output is sorted by descending score; equal scores
/// keep input order.
inline std::vector<Detection> nms(std::span<const Detection> detections, double iou_threshold) {
  std::vector<Detection> sorted(detections.begin(), detections.end());
  for (const auto& d : sorted)
    if (!(d.score >= 0.0 && d.score <= 1.0)) throw ValidationError("nms: detection score outside [0, 1]");
  std::stable_sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.score > b.score; });
  std::vector<Detection> kept;
  for (const auto& d : sorted) {
    const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](const Detection& k) {
      return k.category == d.category && iou(k.box, d.box) > iou_threshold;
    });
    if (!suppressed) kept.push_back(d);
  }
  return kept;
}

inline int count_confident(std::span<const Detection> detections, double theta_p) {
  return static_cast<int>(
      std::count_if(detections.begin(), detections.end(), [&](const Detection& d) { return d.score > theta_p; }));
}

struct ReliabilityVerdict {
  bool reliable = false;
  double raw_count = 0.0;     // density mass before rounding
  long density_count = 0;     // rounded
  int confident_detections = 0;
};

inline ReliabilityVerdict is_reliable(const CheckoutImage& image, const Detector& detector, const Counter& counter,
                                      const GateConfig& cfg = {}) {
  cfg.validate();
  ReliabilityVerdict v;
  v.raw_count = count_from_density(counter.count_map(image));
  v.density_count = round_count(std::max(0.0, v.raw_count));
  v.confident_detections = count_confident(nms(detector.detect(image), cfg.nms_iou), cfg.theta_p);
  v.reliable = v.density_count == v.confident_detections;
  return v;
}

struct Selection {
  std::vector<std::size_t> reliable;  // indices into the test set, ascending
  std::vector<std::size_t> rejected;
  std::vector<ReliabilityVerdict> verdicts;  // one per test image
};

/// Partitions the test set with the reliability gate. Images are scored in
/// parallel when both models declare themselves concurrency-safe.
inline Selection select_reliable(std::span<const CheckoutImage> testset, const Detector& detector,
                                 const Counter& counter, const GateConfig& cfg = {}, unsigned threads = 0) {
  cfg.validate();
  Selection out;
  out.verdicts.resize(testset.size());
  const bool parallel = detector.concurrency_safe() && counter.concurrency_safe();
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(1, testset.size())));

  if (!parallel || threads <= 1) {
    for (std::size_t i = 0; i < testset.size(); ++i) out.verdicts[i] = is_reliable(testset[i], detector, counter, cfg);
  } else {
    std::vector<std::exception_ptr> errors(threads);
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t)
      pool.emplace_back([&, t] {
        try {
          for (std::size_t i = t; i < testset.size(); i += threads)
            out.verdicts[i] = is_reliable(testset[i], detector, counter, cfg);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    for (auto& th : pool) th.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }
  for (std::size_t i = 0; i < testset.size(); ++i) (out.verdicts[i].reliable ? out.reliable : out.rejected).push_back(i);
  return out;
}

struct PseudoLabels {
  std::vector<Detection> detections;
  ShoppingList shopping_list;
};

/// Post-NMS detections with score > theta_p become the image's annotations.
inline PseudoLabels pseudo_label(const CheckoutImage& image, const Detector& detector, const GateConfig& cfg = {}) {
  cfg.validate();
  PseudoLabels out;
  for (auto& d : nms(detector.detect(image), cfg.nms_iou))
    if (d.score > cfg.theta_p) {
      out.shopping_list.add(d.category);
      out.detections.push_back(d);
    }
  return out;
}

// --- Orchestration --------------------------------------------------------

struct PseudoLabeledImage {
  std::size_t index = 0;  // into the test set
  PseudoLabels labels;
};

/// Callbacks invoked at each phase. All are optional.
struct PrimingHooks {
  std::function<void(int iteration)> train;
  std::function<void(const Selection&)> on_select;
  std::function<void()> remove_counter;
  std::function<void(int iteration, std::span<const PseudoLabeledImage>)> fine_tune;
  std::function<void(const MetricsReport&)> on_evaluate;
};

struct PrimingConfig {
  GateConfig gate;
  int iterations = 1;
  bool skip_fine_tune_on_empty = true;
  double tally_threshold = 0.5;

  void validate() const {
    gate.validate();
    if (iterations < 0) throw ValidationError("iteration count must be non-negative");
  }
};

/// Optional test-set ground truth, used only for reporting.
struct ImageTruth {
  ShoppingList shopping_list;
  std::vector<BoxAnnotation> boxes;
  std::string level;
};

struct PhaseRecord {
  std::string name;
  int iterations = 0;
  double milliseconds = 0.0;
};

struct PrimingReport {
  std::vector<PhaseRecord> phases;
  std::size_t train_images = 0;
  std::size_t test_images = 0;
  std::size_t selected = 0;
  bool fine_tuned = false;
  std::vector<ReliabilityVerdict> verdicts;
  /// Fraction of selected images whose pseudo shopping list equals the truth.
  std::optional<double> selection_precision;
  /// Same exact-match rate for rejected images, had they been pseudo-labelled.
  std::optional<double> rejected_list_accuracy;
  std::optional<MetricsReport> metrics;
};

class FineTuneError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Runs the five phases in order: train xN on the synthetic set, select
/// reliable test images, drop the counter, fine-tune xN on the pseudo-labelled
/// selection, evaluate on the full test set.
inline PrimingReport run_priming(std::span<const CheckoutImage> train_set, std::span<const CheckoutImage> test_set,
                                 const Detector& detector, const Counter& counter, const PrimingHooks& hooks,
                                 const PrimingConfig& cfg, std::span<const ImageTruth> test_truth = {}) {
  cfg.validate();
  if (!test_truth.empty() && test_truth.size() != test_set.size())
    throw ValidationError("run_priming: test truth size does not match the test set");
  using Clock = std::chrono::steady_clock;
  auto since = [](Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
  };

  PrimingReport report;
  report.train_images = train_set.size();
  report.test_images = test_set.size();

  auto t0 = Clock::now();
  for (int j = 0; j < cfg.iterations; ++j)
    if (hooks.train) hooks.train(j);
  report.phases.push_back({"train", cfg.iterations, since(t0)});

  t0 = Clock::now();
  const Selection sel = select_reliable(test_set, detector, counter, cfg.gate);
  report.selected = sel.reliable.size();
  report.verdicts = sel.verdicts;
  if (hooks.on_select) hooks.on_select(sel);
  report.phases.push_back({"select", 1, since(t0)});

  t0 = Clock::now();
  if (hooks.remove_counter) hooks.remove_counter();
  report.phases.push_back({"remove_counter", 1, since(t0)});

  t0 = Clock::now();
  std::vector<PseudoLabeledImage> labelled;
  for (auto i : sel.reliable) labelled.push_back({i, pseudo_label(test_set[i], detector, cfg.gate)});
  if (labelled.empty() && !cfg.skip_fine_tune_on_empty)
    throw FineTuneError("no reliable test images were selected; fine-tuning has nothing to train on");
  int tuned = 0;
  if (!labelled.empty()) {
    for (int j = 0; j < cfg.iterations; ++j, ++tuned)
      if (hooks.fine_tune) hooks.fine_tune(j, labelled);
    report.fine_tuned = true;
  }
  report.phases.push_back({"fine_tune", tuned, since(t0)});

  t0 = Clock::now();
  if (!test_truth.empty()) {
    std::size_t sel_hits = 0, rej_hits = 0;
    for (const auto& l : labelled)
      if (l.labels.shopping_list == test_truth[l.index].shopping_list) ++sel_hits;
    for (auto i : sel.rejected)
      if (pseudo_label(test_set[i], detector, cfg.gate).shopping_list == test_truth[i].shopping_list) ++rej_hits;
    if (!sel.reliable.empty()) report.selection_precision = double(sel_hits) / double(sel.reliable.size());
    if (!sel.rejected.empty()) report.rejected_list_accuracy = double(rej_hits) / double(sel.rejected.size());

    std::vector<EvalImage> eval;
    eval.reserve(test_set.size());
    for (std::size_t i = 0; i < test_set.size(); ++i) {
      EvalImage e;
      e.detections = nms(detector.detect(test_set[i]), cfg.gate.nms_iou);
      e.predicted = tally_from_detections(e.detections, cfg.tally_threshold);
      e.ground_truth = test_truth[i].shopping_list;
      e.gt_boxes = test_truth[i].boxes;
      e.level = test_truth[i].level;
      eval.push_back(std::move(e));
    }
    report.metrics = evaluate(eval);
  }
  if (hooks.on_evaluate) hooks.on_evaluate(report.metrics.value_or(MetricsReport{}));
  report.phases.push_back({"evaluate", 1, since(t0)});
  return report;
}

// --- Simulated models -----------------------------------------------------

/// Noise model for the simulated detector and counter. score_concentration
/// c shapes the confidence of correct detections as U^(1/c) (mean c/(c+1));
/// infinity gives exactly 1. Flipped-label and spurious detections score
/// uniformly in [0, 1).
struct SimulatedModelNoise {
  double miss_prob = 0.0;
  double false_pos_rate = 0.0;
  double label_flip_prob = 0.0;
  double box_jitter = 0.0;
  double score_concentration = std::numeric_limits<double>::infinity();
  double count_noise_std = 0.0;

  void validate() const {
    for (double p : {miss_prob, label_flip_prob})
      if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("noise probabilities must lie in [0, 1]");
    if (!(false_pos_rate >= 0.0)) throw ValidationError("false_pos_rate must be non-negative");
    if (!(box_jitter >= 0.0) || !(count_noise_std >= 0.0)) throw ValidationError("noise std must be non-negative");
    if (!(score_concentration > 0.0)) throw ValidationError("score_concentration must be positive");
  }

  friend bool operator==(const SimulatedModelNoise&, const SimulatedModelNoise&) = default;
};

/// Ground truth of one image as seen by the simulated models.
struct SceneTruth {
  Extent image;
  std::vector<BoxAnnotation> boxes;
  std::vector<Point2> points;
};

class SimulatedDetector final : public Detector {
public:
  SimulatedDetector(std::map<std::uint64_t, SceneTruth> truth, std::vector<CategoryId> categories,
                    SimulatedModelNoise noise, std::uint64_t seed)
      : truth_(std::move(truth)), categories_(std::move(categories)), noise_(noise), seed_(seed) {
    noise_.validate();
    if (categories_.empty()) throw ValidationError("simulated detector needs a non-empty category list");
  }

  [[nodiscard]] bool concurrency_safe() const override { return true; }

  [[nodiscard]] std::vector<Detection> detect(const CheckoutImage& image) const override {
    const auto it = truth_.find(image.id);
    if (it == truth_.end()) throw ValidationError("simulated detector: unknown image id " + std::to_string(image.id));
    const SceneTruth& t = it->second;
    std::mt19937_64 rng(mix_seed(seed_, image.id));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> jitter(0.0, 1.0);

    std::vector<Detection> out;
    for (const auto& g : t.boxes) {
      // Every box consumes the same draws so different noise levels stay coupled.
      const double u_miss = unit(rng), u_flip = unit(rng), u_cat = unit(rng), u_score = unit(rng);
      double j[4];
      for (double& v : j) v = jitter(rng);
      if (u_miss < noise_.miss_prob) continue;

      Detection d;
      d.box = {g.box.x_min + noise_.box_jitter * j[0], g.box.y_min + noise_.box_jitter * j[1],
               g.box.x_max + noise_.box_jitter * j[2], g.box.y_max + noise_.box_jitter * j[3]};
      if (d.box.x_min > d.box.x_max) std::swap(d.box.x_min, d.box.x_max);
      if (d.box.y_min > d.box.y_max) std::swap(d.box.y_min, d.box.y_max);
      d.category = g.category;
      if (u_flip < noise_.label_flip_prob && categories_.size() > 1) {
        d.category = other_category(g.category, u_cat);
        d.score = u_score;
      } else {
        d.score = std::isinf(noise_.score_concentration) ? 1.0 : std::pow(u_score, 1.0 / noise_.score_concentration);
      }
      out.push_back(d);
    }

    if (noise_.false_pos_rate > 0.0) {
      const int n_fp = std::poisson_distribution<int>(noise_.false_pos_rate)(rng);
      for (int k = 0; k < n_fp; ++k) {
        const double w = t.image.width * (0.1 + 0.2 * unit(rng));
        const double h = t.image.height * (0.1 + 0.2 * unit(rng));
        const double x = (t.image.width - w) * unit(rng);
        const double y = (t.image.height - h) * unit(rng);
        const auto c = categories_[std::min(categories_.size() - 1, std::size_t(unit(rng) * double(categories_.size())))];
        out.push_back({{x, y, x + w, y + h}, c, unit(rng)});
      }
    }
    return out;
  }

private:
  [[nodiscard]] CategoryId other_category(CategoryId truth, double u) const {
    std::vector<CategoryId> others;
    for (auto c : categories_)
      if (c != truth) others.push_back(c);
    return others[std::min(others.size() - 1, std::size_t(u * double(others.size())))];
  }

  std::map<std::uint64_t, SceneTruth> truth_;
  std::vector<CategoryId> categories_;
  SimulatedModelNoise noise_;
  std::uint64_t seed_;
};

class SimulatedCounter final : public Counter {
public:
  SimulatedCounter(std::map<std::uint64_t, SceneTruth> truth, SimulatedModelNoise noise, std::uint64_t seed,
                   KernelParams kernel = {})
      : noise_(noise), seed_(seed) {
    noise_.validate();
    for (auto& [id, t] : truth) maps_.emplace(id, generate_density(t.points, t.image, kernel));
  }

  [[nodiscard]] bool concurrency_safe() const override { return true; }

  [[nodiscard]] DensityMap count_map(const CheckoutImage& image) const override {
    const auto it = maps_.find(image.id);
    if (it == maps_.end()) throw ValidationError("simulated counter: unknown image id " + std::to_string(image.id));
    DensityMap m = it->second;
    if (noise_.count_noise_std <= 0.0) return m;

    std::mt19937_64 rng(mix_seed(seed_ ^ 0xC0C0C0C0ULL, image.id));
    const double eps = std::normal_distribution<double>(0.0, noise_.count_noise_std)(rng);
    const double mass = count_from_density(m);
    if (mass > 0.0) {
      const double f = std::max(0.0, (mass + eps) / mass);
      for (double& v : m.values) v *= f;
    } else if (eps > 0.0) {
      for (double& v : m.values) v = eps / double(m.values.size());
    }
    return m;
  }

private:
  std::map<std::uint64_t, DensityMap> maps_;
  SimulatedModelNoise noise_;
  std::uint64_t seed_;
};

inline SimulatedDetector simulated_detector(std::map<std::uint64_t, SceneTruth> truth,
                                            std::vector<CategoryId> categories, const SimulatedModelNoise& noise,
                                            std::uint64_t seed) {
  return SimulatedDetector(std::move(truth), std::move(categories), noise, seed);
}

inline SimulatedCounter simulated_counter(std::map<std::uint64_t, SceneTruth> truth, const SimulatedModelNoise& noise,
                                          std::uint64_t seed, const KernelParams& kernel = {}) {
  return SimulatedCounter(std::move(truth), noise, seed, kernel);
}

}  // namespace priming
