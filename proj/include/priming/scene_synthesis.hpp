#pragma once

/// @file scene_synthesis.hpp
/// Copy-paste synthesis of checkout scenes from masked exemplar cutouts.
///
/// Instances are placed in z order with uniform rotation in [0, 360), uniform
/// scale in [0.4, 0.7] and an integer translation drawn by rejection so that
/// every placed instance stays fully on the canvas and no instance is more
/// than half hidden by the instances placed after it. The composed scene
/// carries all three checkout annotation kinds: boxes, points and the
/// shopping list.

#include <cmath>
#include <functional>
#include <map>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "priming/core.hpp"

namespace priming {

enum class Difficulty { easy, medium, hard };

struct CountRange {
  int lo = 0, hi = 0;
  [[nodiscard]] bool contains(int v) const { return v >= lo && v <= hi; }
};

struct DifficultyRanges {
  CountRange categories;
  CountRange instances;
};

/// Category and instance ranges of the three checkout clutter levels.
inline DifficultyRanges difficulty_ranges(Difficulty d) {
  switch (d) {
    case Difficulty::easy: return {{3, 5}, {3, 10}};
    case Difficulty::medium: return {{5, 8}, {10, 15}};
    case Difficulty::hard: return {{8, 10}, {5, 20}};
  }
  throw ValidationError("unknown difficulty");
}

inline std::string_view to_string(Difficulty d) {
  switch (d) {
    case Difficulty::easy: return "easy";
    case Difficulty::medium: return "medium";
    case Difficulty::hard: return "hard";
  }
  return "?";
}

inline Difficulty parse_difficulty(std::string_view s) {
  if (s == "easy") return Difficulty::easy;
  if (s == "medium") return Difficulty::medium;
  if (s == "hard") return Difficulty::hard;
  throw ValidationError("unknown difficulty '" + std::string(s) + "' (expected easy, medium or hard)");
}

struct SynthesisConfig {
  Extent canvas{1800, 1800};
  double scale_min = 0.4;
  double scale_max = 0.7;
  double max_occlusion = 0.5;
  int instance_retries = 100;
  int scene_resamples = 20;
  Rgb background{200, 200, 200};

  /// Small canvas used by tests and quick simulations.
  static SynthesisConfig test_profile() {
    SynthesisConfig c;
    c.canvas = {256, 256};
    return c;
  }

  void validate() const {
    if (canvas.width <= 0 || canvas.height <= 0) throw ValidationError("canvas dimensions must be positive");
    if (!(scale_min > 0.0 && scale_min <= scale_max && scale_max <= 1.0))
      throw ValidationError("scale range must satisfy 0 < min <= max <= 1");
    if (!(max_occlusion > 0.0 && max_occlusion <= 1.0)) throw ValidationError("occlusion cap must lie in (0, 1]");
    if (instance_retries < 1 || scene_resamples < 1) throw ValidationError("retry caps must be positive");
  }
};

/// Masked exemplars available for synthesis (normally the realistic poses
/// left after pruning), indexed by category.
class SceneCatalog {
public:
  SceneCatalog() = default;
  explicit SceneCatalog(std::vector<ExemplarImage> exemplars) : exemplars_(std::move(exemplars)) {
    for (std::size_t i = 0; i < exemplars_.size(); ++i) {
      const auto& e = exemplars_[i];
      if (!e.mask || e.mask->empty())
        throw ValidationError("scene catalog exemplar (category " + std::to_string(e.category.value) + ", view " +
                              std::to_string(e.view) + ") has no mask");
      if (e.mask->extent() != e.pixels.extent()) throw ValidationError("scene catalog: mask/image size mismatch");
      if (e.category.value <= 0) throw ValidationError("scene catalog: category ids must be positive");
      by_category_[e.category].push_back(i);
    }
  }

  [[nodiscard]] const std::vector<ExemplarImage>& exemplars() const { return exemplars_; }
  [[nodiscard]] const ExemplarImage& at(std::size_t i) const { return exemplars_.at(i); }

  [[nodiscard]] std::vector<CategoryId> categories() const {
    std::vector<CategoryId> out;
    for (const auto& [c, v] : by_category_) out.push_back(c);
    return out;
  }

  [[nodiscard]] const std::vector<std::size_t>& views_of(CategoryId c) const {
    auto it = by_category_.find(c);
    if (it == by_category_.end()) throw ValidationError("scene catalog has no category " + std::to_string(c.value));
    return it->second;
  }

private:
  std::vector<ExemplarImage> exemplars_;
  std::map<CategoryId, std::vector<std::size_t>> by_category_;
};

struct SceneSpec {
  Difficulty difficulty = Difficulty::easy;
  int category_count = 0;
  int instance_count = 0;
  Extent canvas{1800, 1800};
  std::string background;  // empty: flat default colour
  std::uint64_t seed = 0;
  /// Category of each instance in placement (z) order.
  std::vector<CategoryId> instance_categories;

  friend bool operator==(const SceneSpec&, const SceneSpec&) = default;
};

struct SceneInstance {
  CategoryId category;
  int view = 0;
  std::size_t exemplar_index = 0;
  AffinePose pose;
  int z = 0;
  BinaryMask mask_on_canvas;
  double occlusion = 0.0;

  friend bool operator==(const SceneInstance&, const SceneInstance&) = default;
};

struct SynthesizedScene {
  SceneSpec spec;
  RgbImage image;
  std::vector<SceneInstance> instances;
  std::vector<BoxAnnotation> bboxes;
  std::vector<PointAnnotation> points;
  ShoppingList shopping_list;

  friend bool operator==(const SynthesizedScene&, const SynthesizedScene&) = default;
};

namespace detail {

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline int uniform_int(std::mt19937_64& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

/// An exemplar mask rotated and scaled at zero translation, cropped to its
/// set bits. Canvas position of patch pixel (x, y) under integer translation
/// (tx, ty) is (x + origin_x + tx, y + origin_y + ty).
struct LocalPatch {
  BinaryMask mask;
  int origin_x = 0, origin_y = 0;
  std::size_t area = 0;
};

inline LocalPatch rasterize_local(const BinaryMask& src, double rotation_deg, double scale) {
  // Bound the rotated/scaled footprint, then render it into a local canvas
  // shifted by an integer offset so every pixel lands at non-negative coordinates.
  const auto [s, c] = exact_sincos(rotation_deg);
  const double hw = 0.5 * src.width() * scale, hh = 0.5 * src.height() * scale;
  const double ex = std::abs(c) * hw + std::abs(s) * hh;
  const double ey = std::abs(s) * hw + std::abs(c) * hh;
  const double cx = 0.5 * src.width(), cy = 0.5 * src.height();
  const int shift_x = static_cast<int>(std::ceil(ex - cx)) + 2;
  const int shift_y = static_cast<int>(std::ceil(ey - cy)) + 2;
  const int lw = static_cast<int>(std::ceil(cx + ex)) + shift_x + 2;
  const int lh = static_cast<int>(std::ceil(cy + ey)) + shift_y + 2;

  BinaryMask local = transform_mask(src, {rotation_deg, scale, double(shift_x), double(shift_y)}, {lw, lh});
  LocalPatch out;
  out.area = local.popcount();
  if (out.area == 0) return out;
  const BBox b = mask_bbox(local);
  const int x0 = int(b.x_min), y0 = int(b.y_min), x1 = int(b.x_max), y1 = int(b.y_max);
  out.mask = BinaryMask(x1 - x0, y1 - y0);
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x)
      if (local.at(x, y)) out.mask.set(x - x0, y - y0);
  out.origin_x = x0 - shift_x;
  out.origin_y = y0 - shift_y;
  return out;
}

}  // namespace detail

/// Draws the category/instance counts for a clutter level and assigns a
/// category to every instance (each chosen category appears at least once).
inline SceneSpec sample_scene_spec(std::mt19937_64& rng, Difficulty difficulty, std::span<const CategoryId> catalog,
                                   Extent canvas = {1800, 1800}, std::uint64_t seed = 0) {
  const auto ranges = difficulty_ranges(difficulty);
  if (static_cast<int>(catalog.size()) < ranges.categories.hi)
    throw ValidationError("catalog has " + std::to_string(catalog.size()) + " categories; level '" +
                          std::string(to_string(difficulty)) + "' needs " + std::to_string(ranges.categories.hi));
  SceneSpec spec;
  spec.difficulty = difficulty;
  spec.canvas = canvas;
  spec.seed = seed;
  spec.category_count = detail::uniform_int(rng, ranges.categories.lo, ranges.categories.hi);
  // Instance lower bound is lifted to the category count so every category appears.
  spec.instance_count =
      detail::uniform_int(rng, std::max(ranges.instances.lo, spec.category_count), ranges.instances.hi);

  std::vector<CategoryId> pool(catalog.begin(), catalog.end());
  std::shuffle(pool.begin(), pool.end(), rng);
  pool.resize(static_cast<std::size_t>(spec.category_count));
  spec.instance_categories = pool;
  while (static_cast<int>(spec.instance_categories.size()) < spec.instance_count)
    spec.instance_categories.push_back(pool[static_cast<std::size_t>(detail::uniform_int(rng, 0, spec.category_count - 1))]);
  std::shuffle(spec.instance_categories.begin(), spec.instance_categories.end(), rng);
  return spec;
}

/// |mask ∩ (∪ later masks)| / |mask|.
inline double occlusion_rate(const SceneInstance& instance, std::span<const SceneInstance> later) {
  const auto& m = instance.mask_on_canvas;
  const std::size_t area = m.popcount();
  if (area == 0) throw ValidationError("occlusion_rate: empty instance mask");
  std::size_t covered = 0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (!m[i]) continue;
    for (const auto& l : later) {
      if (l.mask_on_canvas.extent() != m.extent()) throw ValidationError("occlusion_rate: canvas mismatch");
      if (l.mask_on_canvas[i]) {
        ++covered;
        break;
      }
    }
  }
  return double(covered) / double(area);
}

class PlacementError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Places every instance of `spec` on the canvas. Attempt r uses an RNG
/// stream derived from (spec.seed, r); after `scene_resamples` failed
/// attempts a PlacementError is raised.
inline std::vector<SceneInstance> place_instances(const SceneSpec& spec, const SceneCatalog& catalog,
                                                  const SynthesisConfig& cfg) {
  cfg.validate();
  const Extent canvas = spec.canvas;
  if (canvas.width <= 0 || canvas.height <= 0) throw ValidationError("canvas dimensions must be positive");
  const std::size_t n_pix = static_cast<std::size_t>(canvas.width) * canvas.height;

  for (int attempt = 0; attempt < cfg.scene_resamples; ++attempt) {
    std::mt19937_64 rng(mix_seed(spec.seed, 0x5CE11EULL + static_cast<std::uint64_t>(attempt)));
    std::vector<int> top(n_pix, -1);
    std::vector<std::size_t> covered, area;
    std::vector<SceneInstance> placed;
    std::vector<std::size_t> newly;
    bool failed = false;

    for (std::size_t i = 0; i < spec.instance_categories.size() && !failed; ++i) {
      const CategoryId cat = spec.instance_categories[i];
      const auto& views = catalog.views_of(cat);
      const std::size_t ex_idx = views[static_cast<std::size_t>(detail::uniform_int(rng, 0, int(views.size()) - 1))];
      const ExemplarImage& ex = catalog.at(ex_idx);
      const double rotation = normalize_degrees(detail::uniform(rng, 0.0, 360.0));
      const double scale = detail::uniform(rng, cfg.scale_min, cfg.scale_max);
      const detail::LocalPatch patch = detail::rasterize_local(*ex.mask, rotation, scale);
      if (patch.area == 0) {
        failed = true;
        break;
      }
      // Integer translations keeping the patch entirely on the canvas.
      const int tx_lo = -patch.origin_x, tx_hi = canvas.width - patch.mask.width() - patch.origin_x;
      const int ty_lo = -patch.origin_y, ty_hi = canvas.height - patch.mask.height() - patch.origin_y;
      if (tx_hi < tx_lo || ty_hi < ty_lo) {
        failed = true;
        break;
      }

      bool accepted = false;
      int tx = 0, ty = 0;
      for (int retry = 0; retry < cfg.instance_retries && !accepted; ++retry) {
        tx = detail::uniform_int(rng, tx_lo, tx_hi);
        ty = detail::uniform_int(rng, ty_lo, ty_hi);
        newly.assign(placed.size(), 0);
        for (int y = 0; y < patch.mask.height(); ++y) {
          const std::size_t row = static_cast<std::size_t>(y + patch.origin_y + ty) * canvas.width;
          for (int x = 0; x < patch.mask.width(); ++x) {
            if (!patch.mask.at(x, y)) continue;
            const int owner = top[row + static_cast<std::size_t>(x + patch.origin_x + tx)];
            if (owner >= 0) ++newly[static_cast<std::size_t>(owner)];
          }
        }
        accepted = true;
        for (std::size_t j = 0; j < placed.size(); ++j)
          if (double(covered[j] + newly[j]) / double(area[j]) >= cfg.max_occlusion) {
            accepted = false;
            break;
          }
      }
      if (!accepted) {
        failed = true;
        break;
      }

      for (std::size_t j = 0; j < placed.size(); ++j) covered[j] += newly[j];
      for (int y = 0; y < patch.mask.height(); ++y)
        for (int x = 0; x < patch.mask.width(); ++x)
          if (patch.mask.at(x, y))
            top[static_cast<std::size_t>(y + patch.origin_y + ty) * canvas.width +
                static_cast<std::size_t>(x + patch.origin_x + tx)] = static_cast<int>(i);

      SceneInstance inst;
      inst.category = cat;
      inst.view = ex.view;
      inst.exemplar_index = ex_idx;
      inst.pose = {rotation, scale, double(tx), double(ty)};
      inst.z = static_cast<int>(i);
      inst.mask_on_canvas = transform_mask(*ex.mask, inst.pose, canvas);
      placed.push_back(std::move(inst));
      covered.push_back(0);
      area.push_back(patch.area);
    }
    if (failed) continue;
    for (std::size_t j = 0; j < placed.size(); ++j) placed[j].occlusion = double(covered[j]) / double(area[j]);
    return placed;
  }
  throw PlacementError("could not place " + std::to_string(spec.instance_count) + " instances on a " +
                       std::to_string(canvas.width) + "x" + std::to_string(canvas.height) + " canvas after " +
                       std::to_string(cfg.scene_resamples) + " scene resamples");
}

/// Paints instances in z order over `background` and derives the annotations:
/// boxes from the full on-canvas masks, points from the visible portions.
inline SynthesizedScene compose_scene(const SceneSpec& spec, std::vector<SceneInstance> instances,
                                      const RgbImage& background, const SceneCatalog& catalog) {
  if (background.extent() != spec.canvas) throw ValidationError("compose_scene: background does not match canvas");
  SynthesizedScene scene;
  scene.spec = spec;
  scene.image = background;
  const Extent canvas = spec.canvas;
  std::vector<int> top(static_cast<std::size_t>(canvas.width) * canvas.height, -1);

  std::sort(instances.begin(), instances.end(), [](const auto& a, const auto& b) { return a.z < b.z; });
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const auto& inst = instances[i];
    const ExemplarImage& ex = catalog.at(inst.exemplar_index);
    warp_pixels(ex.pixels.extent(), inst.pose, canvas, [&](int x, int y, int sx, int sy) {
      if (!ex.mask->at(sx, sy)) return;
      scene.image.at(x, y) = ex.pixels.at(sx, sy);
      top[static_cast<std::size_t>(y) * canvas.width + x] = static_cast<int>(i);
    });
  }

  for (std::size_t i = 0; i < instances.size(); ++i) {
    const auto& inst = instances[i];
    scene.bboxes.push_back({mask_bbox(inst.mask_on_canvas), inst.category});
    BinaryMask visible(canvas.width, canvas.height);
    for (std::size_t p = 0; p < top.size(); ++p)
      if (top[p] == static_cast<int>(i)) visible.data()[p] = 1;
    const Point2 centre = visible.empty() ? mask_centroid(inst.mask_on_canvas) : mask_centroid(visible);
    scene.points.push_back({centre, inst.category});
    scene.shopping_list.add(inst.category);
  }
  scene.instances = std::move(instances);
  return scene;
}

/// Appearance-only rendering hook (e.g. an image-to-image translation model).
using SceneRenderer = std::function<RgbImage(const RgbImage&)>;

inline RgbImage identity_renderer(const RgbImage& image) { return image; }

inline SynthesizedScene render_hook(SynthesizedScene scene, const SceneRenderer& renderer = identity_renderer) {
  if (!renderer) return scene;
  RgbImage rendered = renderer(scene.image);
  if (rendered.extent() != scene.image.extent()) throw ValidationError("render_hook: renderer changed image dimensions");
  scene.image = std::move(rendered);
  return scene;
}

/// Full synthesis of one scene: a pure function of (seed, difficulty, catalog, config).
inline SynthesizedScene synthesize_scene(std::uint64_t seed, Difficulty difficulty, const SceneCatalog& catalog,
                                         const SynthesisConfig& cfg, const RgbImage* background = nullptr,
                                         const SceneRenderer& renderer = identity_renderer) {
  cfg.validate();
  std::mt19937_64 rng(mix_seed(seed));
  const auto cats = catalog.categories();
  SceneSpec spec = sample_scene_spec(rng, difficulty, cats, cfg.canvas, seed);
  auto instances = place_instances(spec, catalog, cfg);
  const RgbImage flat = background ? RgbImage{} : RgbImage(cfg.canvas.width, cfg.canvas.height, cfg.background);
  return render_hook(compose_scene(spec, std::move(instances), background ? *background : flat, catalog), renderer);
}

}  // namespace priming
