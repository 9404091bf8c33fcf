#pragma once

/// @file dataset_io.hpp
/// JSON schemas and persistence for catalog manifests, scene annotation
/// files, pipeline configuration and reports.
///
/// Annotation files store boxes COCO-style as [x, y, width, height]; use
/// AnnotationRecord::box() for the corner form used everywhere else.

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "json.hpp"
#include "priming/core.hpp"
#include "priming/data_priming.hpp"
#include "priming/density_map.hpp"
#include "priming/mask_extraction.hpp"
#include "priming/metrics.hpp"
#include "priming/pose_pruning.hpp"
#include "priming/scene_synthesis.hpp"

namespace priming {

using Json = nlohmann::json;
namespace fs = std::filesystem;

namespace detail {

inline Json read_json_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ValidationError("cannot open " + path);
  try {
    return Json::parse(f);
  } catch (const Json::parse_error& e) {
    throw ValidationError(path + ": JSON parse error at byte " + std::to_string(e.byte) + ": " + e.what());
  }
}

inline void write_text_file(const std::string& path, const std::string& text) {
  if (const auto parent = fs::path(path).parent_path(); !parent.empty()) fs::create_directories(parent);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f << text;
  if (!f) throw std::runtime_error("failed writing " + path);
}

/// Typed field access with "<context>.<key>" diagnostics.
template <typename T>
T field(const Json& obj, const std::string& key, const std::string& ctx) {
  if (!obj.is_object()) throw ValidationError(ctx + ": expected an object");
  const auto it = obj.find(key);
  if (it == obj.end()) throw ValidationError(ctx + "." + key + ": missing field");
  if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
    const bool fits = it->is_number_unsigned()
                          ? it->template get<std::uint64_t>() <= std::uint64_t(std::numeric_limits<T>::max())
                          : it->is_number_integer() && std::is_signed_v<T> &&
                                it->template get<std::int64_t>() >= std::int64_t(std::numeric_limits<T>::min()) &&
                                it->template get<std::int64_t>() <= std::int64_t(std::numeric_limits<T>::max());
    if (!fits) {
      if (!it->is_number_integer()) throw ValidationError(ctx + "." + key + ": wrong type (expected an integer)");
      throw ValidationError(ctx + "." + key + ": integer out of range");
    }
  }
  try {
    return it->template get<T>();
  } catch (const Json::exception&) {
    throw ValidationError(ctx + "." + key + ": wrong type");
  }
}

template <typename T>
std::optional<T> optional_field(const Json& obj, const std::string& key, const std::string& ctx) {
  const auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  return field<T>(obj, key, ctx);
}

inline const Json& array_field(const Json& obj, const std::string& key, const std::string& ctx) {
  if (!obj.is_object()) throw ValidationError(ctx + ": expected an object");
  const auto it = obj.find(key);
  if (it == obj.end() || !it->is_array()) throw ValidationError(ctx + "." + key + ": missing or not an array");
  return *it;
}

inline Json shopping_list_json(const ShoppingList& l) {
  Json j = Json::object();
  for (const auto& [c, n] : l.counts()) j[std::to_string(c.value)] = n;
  return j;
}

inline ShoppingList shopping_list_from_json(const Json& j, const std::string& ctx) {
  if (!j.is_object()) throw ValidationError(ctx + ": expected an object of category -> count");
  ShoppingList l;
  for (const auto& [k, v] : j.items()) {
    int cat = 0;
    try {
      std::size_t pos = 0;
      cat = std::stoi(k, &pos);
      if (pos != k.size()) throw std::invalid_argument(k);
    } catch (const std::exception&) {
      throw ValidationError(ctx + ": category key '" + k + "' is not an integer");
    }
    if (cat <= 0) throw ValidationError(ctx + ": category id " + k + " must be positive");
    if (!v.is_number_integer() || v.get<long>() < 0) throw ValidationError(ctx + "." + k + ": count must be a non-negative integer");
    l.add(CategoryId(cat), v.get<int>());
  }
  return l;
}

}  // namespace detail

// --- Catalog manifest -----------------------------------------------------

struct CategoryInfo {
  CategoryId id;
  std::string name;
  std::string sub_category;
  friend bool operator==(const CategoryInfo&, const CategoryInfo&) = default;
};

struct ExemplarRecord {
  CategoryId category;
  int view = 0;
  std::string image;  // relative to the manifest directory
  std::string mask;   // empty: no mask yet
  std::optional<double> area;
  std::optional<double> ratio;
  std::optional<bool> realistic;
  friend bool operator==(const ExemplarRecord&, const ExemplarRecord&) = default;
};

struct CatalogManifest {
  std::vector<CategoryInfo> categories;
  std::vector<ExemplarRecord> exemplars;
  std::optional<double> theta_m;
  friend bool operator==(const CatalogManifest&, const CatalogManifest&) = default;
};

inline Json to_json(const CatalogManifest& m) {
  Json j;
  j["categories"] = Json::array();
  for (const auto& c : m.categories)
    j["categories"].push_back({{"id", c.id.value}, {"name", c.name}, {"sub_category", c.sub_category}});
  j["exemplars"] = Json::array();
  for (const auto& e : m.exemplars) {
    Json r{{"category", e.category.value}, {"view", e.view}, {"image", e.image}, {"mask", e.mask}};
    if (e.area) r["area"] = *e.area;
    if (e.ratio) r["ratio"] = *e.ratio;
    if (e.realistic) r["realistic"] = *e.realistic;
    j["exemplars"].push_back(std::move(r));
  }
  if (m.theta_m) j["theta_m"] = *m.theta_m;
  return j;
}

/// Parses and validates a manifest. When `base_dir` is non-empty, every
/// referenced image/mask must exist relative to it.
inline CatalogManifest catalog_from_json(const Json& j, const fs::path& base_dir = {}) {
  using detail::field;
  using detail::optional_field;
  CatalogManifest m;
  std::set<int> ids;
  const auto& cats = detail::array_field(j, "categories", "catalog");
  for (std::size_t i = 0; i < cats.size(); ++i) {
    const std::string ctx = "categories[" + std::to_string(i) + "]";
    CategoryInfo c{CategoryId(field<int>(cats[i], "id", ctx)), field<std::string>(cats[i], "name", ctx),
                   optional_field<std::string>(cats[i], "sub_category", ctx).value_or("")};
    if (c.id.value <= 0) throw ValidationError(ctx + ".id: must be positive (0 is background)");
    if (!ids.insert(c.id.value).second) throw ValidationError(ctx + ".id: duplicate category id " + std::to_string(c.id.value));
    m.categories.push_back(std::move(c));
  }
  m.theta_m = optional_field<double>(j, "theta_m", "catalog");
  if (m.theta_m && !(*m.theta_m >= 0.0 && *m.theta_m <= 1.0)) throw ValidationError("catalog.theta_m: must lie in [0, 1]");

  std::set<std::pair<int, int>> keys;
  const auto& exs = detail::array_field(j, "exemplars", "catalog");
  for (std::size_t i = 0; i < exs.size(); ++i) {
    const std::string ctx = "exemplars[" + std::to_string(i) + "]";
    ExemplarRecord e;
    e.category = CategoryId(field<int>(exs[i], "category", ctx));
    e.view = field<int>(exs[i], "view", ctx);
    e.image = field<std::string>(exs[i], "image", ctx);
    e.mask = optional_field<std::string>(exs[i], "mask", ctx).value_or("");
    e.area = optional_field<double>(exs[i], "area", ctx);
    e.ratio = optional_field<double>(exs[i], "ratio", ctx);
    e.realistic = optional_field<bool>(exs[i], "realistic", ctx);
    if (!ids.count(e.category.value))
      throw ValidationError(ctx + ".category: unknown category " + std::to_string(e.category.value));
    if (!keys.insert({e.category.value, e.view}).second)
      throw ValidationError(ctx + ": duplicate (category, view) = (" + std::to_string(e.category.value) + ", " +
                            std::to_string(e.view) + ")");
    if (e.area && !(*e.area >= 0.0)) throw ValidationError(ctx + ".area: must be non-negative");
    if (e.ratio && !(*e.ratio >= 0.0 && *e.ratio <= 1.0)) throw ValidationError(ctx + ".ratio: must lie in [0, 1]");
    if (m.theta_m && e.ratio && e.realistic && *e.realistic != (*e.ratio >= *m.theta_m))
      throw ValidationError(ctx + ".realistic: inconsistent with ratio " + std::to_string(*e.ratio) +
                            " and theta_m " + std::to_string(*m.theta_m));
    if (!base_dir.empty()) {
      if (!fs::exists(base_dir / e.image)) throw ValidationError(ctx + ".image: file not found: " + (base_dir / e.image).string());
      if (!e.mask.empty() && !fs::exists(base_dir / e.mask))
        throw ValidationError(ctx + ".mask: file not found: " + (base_dir / e.mask).string());
    }
    m.exemplars.push_back(std::move(e));
  }

  // Ratios must agree with the areas they were derived from.
  std::map<int, std::vector<const ExemplarRecord*>> per_cat;
  for (const auto& e : m.exemplars) per_cat[e.category.value].push_back(&e);
  for (const auto& [cat, recs] : per_cat) {
    const bool full = std::all_of(recs.begin(), recs.end(), [](auto* r) { return r->area && r->ratio; });
    if (!full) continue;
    std::vector<double> areas;
    for (auto* r : recs) areas.push_back(*r->area);
    const auto ratios = pose_ratios(areas);
    for (std::size_t k = 0; k < recs.size(); ++k)
      if (std::abs(ratios[k] - *recs[k]->ratio) > 1e-9)
        throw ValidationError("category " + std::to_string(cat) + " view " + std::to_string(recs[k]->view) +
                              ": ratio " + std::to_string(*recs[k]->ratio) + " does not match its area (expected " +
                              std::to_string(ratios[k]) + ")");
  }
  return m;
}

inline CatalogManifest load_catalog(const std::string& path) {
  const Json j = detail::read_json_file(path);
  const fs::path base = fs::path(path).parent_path();
  try {
    return catalog_from_json(j, base.empty() ? fs::path(".") : base);
  } catch (const ValidationError& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

inline void save_catalog(const CatalogManifest& m, const std::string& path) {
  detail::write_text_file(path, to_json(m).dump(2) + "\n");
}

// --- Scene annotations ----------------------------------------------------

struct ImageRecord {
  std::uint64_t id = 0;
  std::string file;
  int width = 0, height = 0;
  std::string difficulty;
  std::uint64_t seed = 0;
  friend bool operator==(const ImageRecord&, const ImageRecord&) = default;
};

struct AnnotationRecord {
  std::uint64_t image_id = 0;
  CategoryId category;
  std::array<double, 4> bbox{};  // x, y, width, height
  Point2 point;
  std::optional<double> score;   // present on predictions

  [[nodiscard]] BBox box() const { return {bbox[0], bbox[1], bbox[0] + bbox[2], bbox[1] + bbox[3]}; }
  static std::array<double, 4> xywh(const BBox& b) { return {b.x_min, b.y_min, b.width(), b.height()}; }

  friend bool operator==(const AnnotationRecord&, const AnnotationRecord&) = default;
};

struct SceneAnnotationFile {
  std::vector<ImageRecord> images;
  std::vector<AnnotationRecord> annotations;
  std::map<std::uint64_t, ShoppingList> shopping_lists;
  friend bool operator==(const SceneAnnotationFile&, const SceneAnnotationFile&) = default;

  [[nodiscard]] std::vector<const AnnotationRecord*> annotations_of(std::uint64_t image_id) const {
    std::vector<const AnnotationRecord*> out;
    for (const auto& a : annotations)
      if (a.image_id == image_id) out.push_back(&a);
    return out;
  }
};

enum class ListCheck { strict, lenient };

inline Json to_json(const SceneAnnotationFile& f) {
  Json j;
  j["images"] = Json::array();
  for (const auto& im : f.images)
    j["images"].push_back({{"id", im.id},
                           {"file", im.file},
                           {"width", im.width},
                           {"height", im.height},
                           {"difficulty", im.difficulty},
                           {"seed", im.seed}});
  j["annotations"] = Json::array();
  for (const auto& a : f.annotations) {
    Json r{{"image_id", a.image_id},
           {"category", a.category.value},
           {"bbox", {a.bbox[0], a.bbox[1], a.bbox[2], a.bbox[3]}},
           {"point", {a.point.x, a.point.y}}};
    if (a.score) r["score"] = *a.score;
    j["annotations"].push_back(std::move(r));
  }
  j["shopping_lists"] = Json::object();
  for (const auto& [id, l] : f.shopping_lists) j["shopping_lists"][std::to_string(id)] = detail::shopping_list_json(l);
  return j;
}

/// With ListCheck::strict every image's shopping list must equal the tally
/// of its annotations (prediction files may carry lists that differ).
inline SceneAnnotationFile annotations_from_json(const Json& j, ListCheck check = ListCheck::strict) {
  using detail::field;
  SceneAnnotationFile f;
  if (!j.is_object()) throw ValidationError("annotations: expected a JSON object");
  std::set<std::uint64_t> ids;
  if (j.contains("images")) {
    const auto& imgs = detail::array_field(j, "images", "annotations file");
    for (std::size_t i = 0; i < imgs.size(); ++i) {
      const std::string ctx = "images[" + std::to_string(i) + "]";
      ImageRecord r{field<std::uint64_t>(imgs[i], "id", ctx),
                    detail::optional_field<std::string>(imgs[i], "file", ctx).value_or(""),
                    field<int>(imgs[i], "width", ctx),
                    field<int>(imgs[i], "height", ctx),
                    detail::optional_field<std::string>(imgs[i], "difficulty", ctx).value_or(""),
                    detail::optional_field<std::uint64_t>(imgs[i], "seed", ctx).value_or(0)};
      if (r.width <= 0 || r.height <= 0) throw ValidationError(ctx + ": image dimensions must be positive");
      if (!ids.insert(r.id).second) throw ValidationError(ctx + ".id: duplicate image id " + std::to_string(r.id));
      f.images.push_back(std::move(r));
    }
  }
  if (j.contains("annotations")) {
    const auto& anns = detail::array_field(j, "annotations", "annotations file");
    for (std::size_t i = 0; i < anns.size(); ++i) {
      const std::string ctx = "annotations[" + std::to_string(i) + "]";
      AnnotationRecord a;
      a.image_id = field<std::uint64_t>(anns[i], "image_id", ctx);
      a.category = CategoryId(field<int>(anns[i], "category", ctx));
      const auto bbox = field<std::vector<double>>(anns[i], "bbox", ctx);
      const auto point = field<std::vector<double>>(anns[i], "point", ctx);
      if (bbox.size() != 4) throw ValidationError(ctx + ".bbox: expected [x, y, width, height]");
      if (point.size() != 2) throw ValidationError(ctx + ".point: expected [cx, cy]");
      a.bbox = {bbox[0], bbox[1], bbox[2], bbox[3]};
      a.point = {point[0], point[1]};
      a.score = detail::optional_field<double>(anns[i], "score", ctx);
      if (!ids.count(a.image_id))
        throw ValidationError(ctx + ".image_id: references unknown image " + std::to_string(a.image_id));
      if (a.category.value <= 0) throw ValidationError(ctx + ".category: must be positive");
      if (a.bbox[2] < 0 || a.bbox[3] < 0) throw ValidationError(ctx + ".bbox: negative width or height");
      if (a.score && !(*a.score >= 0.0 && *a.score <= 1.0)) throw ValidationError(ctx + ".score: must lie in [0, 1]");
      f.annotations.push_back(a);
    }
  }
  if (j.contains("shopping_lists")) {
    const auto& sl = j["shopping_lists"];
    if (!sl.is_object()) throw ValidationError("shopping_lists: expected an object keyed by image id");
    for (const auto& [k, v] : sl.items()) {
      std::uint64_t id = 0;
      try {
        std::size_t pos = 0;
        id = std::stoull(k, &pos);
        if (pos != k.size()) throw std::invalid_argument(k);
      } catch (const std::exception&) {
        throw ValidationError("shopping_lists: key '" + k + "' is not an image id");
      }
      if (!ids.count(id)) throw ValidationError("shopping_lists." + k + ": references unknown image");
      f.shopping_lists[id] = detail::shopping_list_from_json(v, "shopping_lists." + k);
    }
  }
  if (check == ListCheck::strict) {
    std::map<std::uint64_t, ShoppingList> tally;
    for (const auto& a : f.annotations) tally[a.image_id].add(a.category);
    for (const auto& im : f.images) {
      const ShoppingList expected = tally.count(im.id) ? tally[im.id] : ShoppingList{};
      const auto it = f.shopping_lists.find(im.id);
      const ShoppingList stored = it == f.shopping_lists.end() ? ShoppingList{} : it->second;
      if (!(expected == stored))
        throw ValidationError("image " + std::to_string(im.id) +
                              ": shopping list is inconsistent with its annotations (expected " +
                              detail::shopping_list_json(expected).dump() + ", found " +
                              detail::shopping_list_json(stored).dump() + ")");
    }
  }
  return f;
}

inline SceneAnnotationFile load_annotations(const std::string& path, ListCheck check = ListCheck::strict) {
  const Json j = detail::read_json_file(path);
  try {
    return annotations_from_json(j, check);
  } catch (const ValidationError& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

inline void save_annotations(const SceneAnnotationFile& f, const std::string& path) {
  detail::write_text_file(path, to_json(f).dump(2) + "\n");
}

// --- Pipeline configuration -----------------------------------------------

/// Every tunable of the pipeline. Serialised as one flat JSON object;
/// command-line flags override file values.
struct PipelineConfig {
  // mask extraction
  double edge_threshold = 0.1;
  int dilate_radius = 3;
  int erode_radius = 3;
  double min_area_frac = 0.001;
  int median_radius = 2;
  // pose pruning
  double theta_m = 0.45;
  // synthesis
  double scale_min = 0.4;
  double scale_max = 0.7;
  double max_occlusion = 0.5;
  int canvas_width = 1800;
  int canvas_height = 1800;
  int instance_retries = 100;
  int scene_resamples = 20;
  // density
  double sigma = 2.0;
  double truncation_radius = 8.0;
  bool adaptive_sigma = false;
  // loss
  double lambda = 1.0;
  // priming
  double theta_p = 0.95;
  double nms_iou = 0.5;
  double tally_threshold = 0.5;
  int iterations = 1;
  // run
  std::uint64_t seed = 0;
  int catalog_categories = 12;
  int exemplar_size = 96;
  std::string level = "medium";
  int train_scenes = 20;
  int test_scenes = 20;
  SimulatedModelNoise noise;

  friend bool operator==(const PipelineConfig&, const PipelineConfig&) = default;

  void validate() const {
    MorphParams{edge_threshold, dilate_radius, erode_radius, 0, median_radius}.validate();
    if (!(min_area_frac >= 0.0 && min_area_frac <= 1.0)) throw ValidationError("min_area_frac must lie in [0, 1]");
    PruneConfig{theta_m}.validate();
    synthesis().validate();
    kernel().validate();
    if (!(lambda >= 0.0)) throw ValidationError("lambda must be non-negative");
    priming().validate();
    if (!(tally_threshold >= 0.0 && tally_threshold <= 1.0)) throw ValidationError("tally_threshold must lie in [0, 1]");
    if (catalog_categories < 1 || exemplar_size < 16) throw ValidationError("invalid fixture catalog settings");
    if (train_scenes < 0 || test_scenes < 0) throw ValidationError("scene counts must be non-negative");
    parse_difficulty(level);
    noise.validate();
  }

  [[nodiscard]] SynthesisConfig synthesis() const {
    SynthesisConfig s;
    s.canvas = {canvas_width, canvas_height};
    s.scale_min = scale_min;
    s.scale_max = scale_max;
    s.max_occlusion = max_occlusion;
    s.instance_retries = instance_retries;
    s.scene_resamples = scene_resamples;
    return s;
  }

  [[nodiscard]] KernelParams kernel() const {
    KernelParams k;
    k.sigma = sigma;
    k.truncation_radius = truncation_radius;
    k.adaptive = adaptive_sigma;
    return k;
  }

  [[nodiscard]] MorphParams morph(Extent image) const {
    MorphParams p = MorphParams::for_image(image, min_area_frac);
    p.edge_threshold = edge_threshold;
    p.dilate_radius = dilate_radius;
    p.erode_radius = erode_radius;
    p.median_radius = median_radius;
    return p;
  }

  [[nodiscard]] PrimingConfig priming() const {
    PrimingConfig p;
    p.gate = {theta_p, nms_iou};
    p.iterations = iterations;
    p.tally_threshold = tally_threshold;
    return p;
  }
};

inline Json noise_to_json(const SimulatedModelNoise& n) {
  Json j{{"miss_prob", n.miss_prob},
         {"false_pos_rate", n.false_pos_rate},
         {"label_flip_prob", n.label_flip_prob},
         {"box_jitter", n.box_jitter},
         {"count_noise_std", n.count_noise_std}};
  // JSON has no infinity; null means "exact scores".
  j["score_concentration"] = std::isinf(n.score_concentration) ? Json(nullptr) : Json(n.score_concentration);
  return j;
}

inline SimulatedModelNoise noise_from_json(const Json& j, const std::string& ctx = "noise") {
  if (!j.is_object()) throw ValidationError(ctx + ": expected an object");
  static const std::set<std::string> known{"miss_prob",  "false_pos_rate",  "label_flip_prob",
                                           "box_jitter", "count_noise_std", "score_concentration"};
  for (const auto& [k, v] : j.items())
    if (!known.count(k)) throw ValidationError(ctx + "." + k + ": unknown key");
  SimulatedModelNoise n;
  n.miss_prob = detail::optional_field<double>(j, "miss_prob", ctx).value_or(0.0);
  n.false_pos_rate = detail::optional_field<double>(j, "false_pos_rate", ctx).value_or(0.0);
  n.label_flip_prob = detail::optional_field<double>(j, "label_flip_prob", ctx).value_or(0.0);
  n.box_jitter = detail::optional_field<double>(j, "box_jitter", ctx).value_or(0.0);
  n.count_noise_std = detail::optional_field<double>(j, "count_noise_std", ctx).value_or(0.0);
  n.score_concentration = detail::optional_field<double>(j, "score_concentration", ctx)
                              .value_or(std::numeric_limits<double>::infinity());
  n.validate();
  return n;
}

inline Json to_json(const PipelineConfig& c) {
  return Json{{"edge_threshold", c.edge_threshold},
              {"dilate_radius", c.dilate_radius},
              {"erode_radius", c.erode_radius},
              {"min_area_frac", c.min_area_frac},
              {"median_radius", c.median_radius},
              {"theta_m", c.theta_m},
              {"scale_min", c.scale_min},
              {"scale_max", c.scale_max},
              {"max_occlusion", c.max_occlusion},
              {"canvas_width", c.canvas_width},
              {"canvas_height", c.canvas_height},
              {"instance_retries", c.instance_retries},
              {"scene_resamples", c.scene_resamples},
              {"sigma", c.sigma},
              {"truncation_radius", c.truncation_radius},
              {"adaptive_sigma", c.adaptive_sigma},
              {"lambda", c.lambda},
              {"theta_p", c.theta_p},
              {"nms_iou", c.nms_iou},
              {"tally_threshold", c.tally_threshold},
              {"iterations", c.iterations},
              {"seed", c.seed},
              {"catalog_categories", c.catalog_categories},
              {"exemplar_size", c.exemplar_size},
              {"level", c.level},
              {"train_scenes", c.train_scenes},
              {"test_scenes", c.test_scenes},
              {"noise", noise_to_json(c.noise)}};
}

/// Overlays the keys present in `j` onto `base`; unknown keys are rejected.
inline PipelineConfig config_from_json(const Json& j, PipelineConfig base = {}) {
  if (!j.is_object()) throw ValidationError("config: expected a JSON object");
  const Json defaults = to_json(base);
  for (const auto& [k, v] : j.items())
    if (!defaults.contains(k)) throw ValidationError("config." + k + ": unknown key");
  auto get = [&](const char* key, auto& dst) {
    if (auto v = detail::optional_field<std::decay_t<decltype(dst)>>(j, key, "config")) dst = *v;
  };
  get("edge_threshold", base.edge_threshold);
  get("dilate_radius", base.dilate_radius);
  get("erode_radius", base.erode_radius);
  get("min_area_frac", base.min_area_frac);
  get("median_radius", base.median_radius);
  get("theta_m", base.theta_m);
  get("scale_min", base.scale_min);
  get("scale_max", base.scale_max);
  get("max_occlusion", base.max_occlusion);
  get("canvas_width", base.canvas_width);
  get("canvas_height", base.canvas_height);
  get("instance_retries", base.instance_retries);
  get("scene_resamples", base.scene_resamples);
  get("sigma", base.sigma);
  get("truncation_radius", base.truncation_radius);
  get("adaptive_sigma", base.adaptive_sigma);
  get("lambda", base.lambda);
  get("theta_p", base.theta_p);
  get("nms_iou", base.nms_iou);
  get("tally_threshold", base.tally_threshold);
  get("iterations", base.iterations);
  get("seed", base.seed);
  get("catalog_categories", base.catalog_categories);
  get("exemplar_size", base.exemplar_size);
  get("level", base.level);
  get("train_scenes", base.train_scenes);
  get("test_scenes", base.test_scenes);
  if (j.contains("noise")) base.noise = noise_from_json(j["noise"], "config.noise");
  base.validate();
  return base;
}

/// Environment variable naming the default config file.
inline constexpr const char* kConfigEnvVar = "PRIMING_CONFIG";

inline PipelineConfig load_config(const std::string& path) {
  try {
    return config_from_json(detail::read_json_file(path));
  } catch (const ValidationError& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

// --- Reports --------------------------------------------------------------

inline Json to_json(const MetricValues& v) {
  return Json{{"cAcc", v.cacc}, {"ACD", v.acd},     {"mCCD", v.mccd},    {"mCIoU", v.mciou},
              {"mAP50", v.map50}, {"mmAP", v.mmap}, {"images", v.images}};
}

inline MetricValues metric_values_from_json(const Json& j, const std::string& ctx) {
  using detail::field;
  MetricValues v;
  v.cacc = field<double>(j, "cAcc", ctx);
  v.acd = field<double>(j, "ACD", ctx);
  v.mccd = field<double>(j, "mCCD", ctx);
  v.mciou = field<double>(j, "mCIoU", ctx);
  v.map50 = field<double>(j, "mAP50", ctx);
  v.mmap = field<double>(j, "mmAP", ctx);
  v.images = field<std::size_t>(j, "images", ctx);
  for (double r : {v.cacc, v.mciou, v.map50, v.mmap})
    if (!(r >= 0.0 && r <= 1.0)) throw ValidationError(ctx + ": ratio metric outside [0, 1]");
  if (!(v.acd >= 0.0 && v.mccd >= 0.0)) throw ValidationError(ctx + ": distance metric is negative");
  return v;
}

inline Json to_json(const MetricsReport& r) {
  Json j = to_json(r.overall);
  j["per_level"] = Json::object();
  for (const auto& [level, v] : r.per_level) j["per_level"][level] = to_json(v);
  return j;
}

inline MetricsReport metrics_report_from_json(const Json& j) {
  MetricsReport r;
  r.overall = metric_values_from_json(j, "report");
  if (j.contains("per_level")) {
    if (!j["per_level"].is_object()) throw ValidationError("report.per_level: expected an object");
    for (const auto& [level, v] : j["per_level"].items())
      r.per_level[level] = metric_values_from_json(v, "report.per_level." + level);
  }
  return r;
}

inline Json to_json(const PrimingReport& r, bool include_timing = false) {
  Json j;
  j["phases"] = Json::array();
  for (const auto& p : r.phases) {
    Json ph{{"name", p.name}, {"iterations", p.iterations}};
    if (include_timing) ph["milliseconds"] = p.milliseconds;
    j["phases"].push_back(std::move(ph));
  }
  j["train_images"] = r.train_images;
  j["test_images"] = r.test_images;
  j["selected"] = r.selected;
  j["fine_tuned"] = r.fine_tuned;
  j["selection_precision"] = r.selection_precision ? Json(*r.selection_precision) : Json(nullptr);
  j["rejected_list_accuracy"] = r.rejected_list_accuracy ? Json(*r.rejected_list_accuracy) : Json(nullptr);
  j["verdicts"] = Json::array();
  for (const auto& v : r.verdicts)
    j["verdicts"].push_back({{"reliable", v.reliable},
                             {"density_count", v.density_count},
                             {"raw_count", v.raw_count},
                             {"confident_detections", v.confident_detections}});
  j["metrics"] = r.metrics ? to_json(*r.metrics) : Json(nullptr);
  return j;
}

inline PrimingReport priming_report_from_json(const Json& j) {
  using detail::field;
  PrimingReport r;
  const auto& phases = detail::array_field(j, "phases", "report");
  for (std::size_t i = 0; i < phases.size(); ++i) {
    const std::string ctx = "phases[" + std::to_string(i) + "]";
    r.phases.push_back({field<std::string>(phases[i], "name", ctx), field<int>(phases[i], "iterations", ctx),
                        detail::optional_field<double>(phases[i], "milliseconds", ctx).value_or(0.0)});
  }
  r.train_images = field<std::size_t>(j, "train_images", "report");
  r.test_images = field<std::size_t>(j, "test_images", "report");
  r.selected = field<std::size_t>(j, "selected", "report");
  r.fine_tuned = field<bool>(j, "fine_tuned", "report");
  r.selection_precision = detail::optional_field<double>(j, "selection_precision", "report");
  r.rejected_list_accuracy = detail::optional_field<double>(j, "rejected_list_accuracy", "report");
  const auto& verdicts = detail::array_field(j, "verdicts", "report");
  for (std::size_t i = 0; i < verdicts.size(); ++i) {
    const std::string ctx = "verdicts[" + std::to_string(i) + "]";
    r.verdicts.push_back({field<bool>(verdicts[i], "reliable", ctx), field<double>(verdicts[i], "raw_count", ctx),
                          field<long>(verdicts[i], "density_count", ctx),
                          field<int>(verdicts[i], "confident_detections", ctx)});
  }
  if (r.selected > r.test_images) throw ValidationError("report.selected exceeds report.test_images");
  if (j.contains("metrics") && !j["metrics"].is_null()) r.metrics = metrics_report_from_json(j["metrics"]);
  return r;
}

/// One row per exemplar view of the pose-pruning report.
inline Json to_json(std::span<const PoseRecord> records) {
  Json j = Json::array();
  for (const auto& r : records)
    j.push_back({{"category", r.category.value},
                 {"view", r.view},
                 {"area", r.area},
                 {"ratio", r.ratio},
                 {"kept", r.realistic}});
  return j;
}

}  // namespace priming
