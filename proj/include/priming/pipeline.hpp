#pragma once

/// @file pipeline.hpp
/// Directory-level operations behind the command-line tool: writing the
/// fixture catalog, batch mask extraction, pose pruning over a mask folder,
/// dataset synthesis, density export and the simulated priming run.
///
/// Exemplar files are named "<category>_<view>.png".

#include <algorithm>
#include <filesystem>
#include <future>
#include <map>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "priming/catalog_fixture.hpp"
#include "priming/data_priming.hpp"
#include "priming/dataset_io.hpp"
#include "priming/density_map.hpp"
#include "priming/image_io.hpp"
#include "priming/mask_extraction.hpp"
#include "priming/pose_pruning.hpp"
#include "priming/scene_synthesis.hpp"

namespace priming {

/// Runs fn(i) for i in [0, n) on up to hardware_concurrency threads.
/// Results must be written to per-index slots so output order is fixed.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  const std::size_t workers = std::min<std::size_t>(n, std::max(1u, std::thread::hardware_concurrency()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::future<void>> jobs;
  for (std::size_t w = 0; w < workers; ++w)
    jobs.push_back(std::async(std::launch::async, [&, w] {
      for (std::size_t i = w; i < n; i += workers) fn(i);
    }));
  for (auto& j : jobs) j.get();
}

inline std::string exemplar_file_name(CategoryId c, int view) {
  return std::to_string(c.value) + "_" + std::to_string(view) + ".png";
}

/// Parses "<category>_<view>" from a file stem.
inline std::optional<std::pair<CategoryId, int>> parse_exemplar_name(const fs::path& p) {
  static const std::regex re(R"((\d+)_(\d+))");
  std::smatch m;
  const std::string stem = p.stem().string();
  if (!std::regex_match(stem, m, re)) return std::nullopt;
  return std::make_pair(CategoryId(std::stoi(m[1])), std::stoi(m[2]));
}

inline std::vector<fs::path> list_images(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw ValidationError("not a directory: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && is_image_file(e.path())) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

/// Writes the procedural catalog: images/, masks/ (exact footprints) and
/// catalog.json with areas, ratios and realistic flags under theta_m.
inline CatalogManifest write_fixture_catalog(const fs::path& dir, const FixtureOptions& opt, double theta_m = 0.45) {
  fs::create_directories(dir / "images");
  fs::create_directories(dir / "masks");
  const auto fixtures = make_fixture_catalog(opt);
  CatalogManifest m;
  m.theta_m = theta_m;
  std::vector<PoseRecord> poses;
  for (const auto& fx : fixtures) {
    const auto& ex = fx.exemplar;
    if (m.categories.empty() || m.categories.back().id != ex.category)
      m.categories.push_back({ex.category, fx.name, fx.sub_category});
    const std::string name = exemplar_file_name(ex.category, ex.view);
    write_png((dir / "images" / name).string(), ex.pixels);
    write_mask((dir / "masks" / name).string(), *ex.mask);
    poses.push_back({ex.category, ex.view, double(ex.mask->popcount()), 0.0, false});
    m.exemplars.push_back({ex.category, ex.view, "images/" + name, "masks/" + name, std::nullopt, std::nullopt,
                           std::nullopt});
  }
  score_poses(poses);
  for (std::size_t i = 0; i < poses.size(); ++i) {
    m.exemplars[i].area = poses[i].area;
    m.exemplars[i].ratio = poses[i].ratio;
    m.exemplars[i].realistic = poses[i].ratio >= theta_m;
  }
  save_catalog(m, (dir / "catalog.json").string());
  return m;
}

/// Extracts a coarse mask for every image in `input`, writing same-stem PNGs
/// to `output`. Returns the number of masks written.
inline std::size_t extract_masks_dir(const fs::path& input, const fs::path& output, const PipelineConfig& cfg,
                                     const MaskRefiner& refiner = identity_refiner) {
  const auto files = list_images(input);
  fs::create_directories(output);
  parallel_for(files.size(), [&](std::size_t i) {
    ExemplarImage ex;
    ex.pixels = read_image(files[i].string());
    const BinaryMask m = extract_mask(ex, cfg.morph(ex.pixels.extent()), refiner);
    write_mask((output / (files[i].stem().string() + ".png")).string(), m);
  });
  return files.size();
}

/// Scores and prunes every "<category>_<view>.png" mask in `dir`.
inline std::vector<PoseRecord> prune_masks_dir(const fs::path& dir, double theta_m) {
  std::vector<PoseRecord> records;
  for (const auto& p : list_images(dir)) {
    const auto key = parse_exemplar_name(p);
    if (!key) throw ValidationError("mask file " + p.string() + " is not named <category>_<view>.png");
    records.push_back({key->first, key->second, double(read_mask(p.string()).popcount()), 0.0, false});
  }
  if (records.empty()) throw ValidationError("no masks found in " + dir.string());
  std::sort(records.begin(), records.end(), [](const auto& a, const auto& b) {
    return std::tie(a.category, a.view) < std::tie(b.category, b.view);
  });
  score_poses(records);
  PruneConfig{theta_m}.validate();
  for (auto& r : records) r.realistic = r.ratio >= theta_m;
  return records;
}

/// Loads a catalog directory (catalog.json + files) and keeps the realistic
/// views. Missing area/ratio fields are computed from the masks.
inline SceneCatalog load_scene_catalog(const fs::path& dir, double theta_m) {
  const auto manifest = load_catalog((dir / "catalog.json").string());
  std::vector<ExemplarImage> all;
  std::vector<PoseRecord> poses;
  for (const auto& e : manifest.exemplars) {
    if (e.mask.empty())
      throw ValidationError("catalog exemplar " + e.image + " has no mask; run extract-masks first");
    ExemplarImage ex;
    ex.category = e.category;
    ex.view = e.view;
    ex.pixels = read_image((dir / e.image).string());
    ex.mask = read_mask((dir / e.mask).string());
    if (ex.mask->extent() != ex.pixels.extent())
      throw ValidationError("catalog exemplar " + e.image + ": mask size differs from image");
    poses.push_back({e.category, e.view, double(ex.mask->popcount()), 0.0, false});
    all.push_back(std::move(ex));
  }
  score_poses(poses);
  std::vector<ExemplarImage> kept;
  for (std::size_t i = 0; i < all.size(); ++i) {
    const auto& rec = manifest.exemplars[i];
    const bool realistic = rec.realistic.value_or(poses[i].ratio >= theta_m);
    if (realistic) kept.push_back(std::move(all[i]));
  }
  return SceneCatalog(std::move(kept));
}

/// Builds the in-memory fixture catalog with pose pruning applied.
inline SceneCatalog fixture_scene_catalog(const FixtureOptions& opt = {}, double theta_m = 0.45) {
  auto fixtures = make_fixture_catalog(opt);
  std::vector<PoseRecord> poses;
  for (const auto& fx : fixtures)
    poses.push_back({fx.exemplar.category, fx.exemplar.view, double(fx.exemplar.mask->popcount()), 0.0, false});
  score_poses(poses);
  std::vector<ExemplarImage> kept;
  for (std::size_t i = 0; i < fixtures.size(); ++i)
    if (poses[i].ratio >= theta_m) kept.push_back(std::move(fixtures[i].exemplar));
  return SceneCatalog(std::move(kept));
}

/// Whether synthesized scenes keep their full-canvas instance masks. Boxes,
/// points and lists do not need them; at large canvases they dominate memory.
enum class InstanceMasks { keep, drop };

/// Scene i is synthesised from seed mix_seed(seed, i); output order is by i.
inline std::vector<SynthesizedScene> synthesize_dataset(const SceneCatalog& catalog, Difficulty level, std::size_t count,
                                                        std::uint64_t seed, const SynthesisConfig& cfg,
                                                        InstanceMasks masks = InstanceMasks::keep) {
  std::vector<SynthesizedScene> scenes(count);
  std::vector<std::exception_ptr> errors(count);
  parallel_for(count, [&](std::size_t i) {
    try {
      scenes[i] = synthesize_scene(mix_seed(seed, i), level, catalog, cfg);
      if (masks == InstanceMasks::drop)
        for (auto& inst : scenes[i].instances) inst.mask_on_canvas = BinaryMask{};
    } catch (...) {
      errors[i] = std::current_exception();
    }
  });
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return scenes;
}

inline SceneAnnotationFile annotation_file(std::span<const SynthesizedScene> scenes, std::uint64_t first_id = 0) {
  SceneAnnotationFile f;
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    const auto& s = scenes[i];
    const std::uint64_t id = first_id + i;
    f.images.push_back({id, "images/" + std::to_string(id) + ".png", s.image.width(), s.image.height(),
                        std::string(to_string(s.spec.difficulty)), s.spec.seed});
    for (std::size_t k = 0; k < s.bboxes.size(); ++k)
      f.annotations.push_back({id, s.bboxes[k].category, AnnotationRecord::xywh(s.bboxes[k].box), s.points[k].point,
                               std::nullopt});
    f.shopping_lists[id] = s.shopping_list;
  }
  return f;
}

inline void write_dataset(std::span<const SynthesizedScene> scenes, const fs::path& out) {
  fs::create_directories(out / "images");
  const auto ann = annotation_file(scenes);
  parallel_for(scenes.size(), [&](std::size_t i) {
    write_png((out / ann.images[i].file).string(), scenes[i].image);
  });
  save_annotations(ann, (out / "annotations.json").string());
}

inline std::map<std::uint64_t, SceneTruth> scene_truths(const SceneAnnotationFile& f) {
  std::map<std::uint64_t, SceneTruth> out;
  for (const auto& im : f.images) out[im.id].image = {im.width, im.height};
  for (const auto& a : f.annotations) {
    auto& t = out[a.image_id];
    t.boxes.push_back({a.box(), a.category});
    t.points.push_back(a.point);
  }
  return out;
}

inline std::vector<CategoryId> annotation_categories(const SceneAnnotationFile& f) {
  std::set<CategoryId> cats;
  for (const auto& a : f.annotations) cats.insert(a.category);
  return {cats.begin(), cats.end()};
}

/// Writes "<image id>.dmap" for every image of an annotation file.
inline std::size_t density_dir(const SceneAnnotationFile& f, const KernelParams& kernel, const fs::path& out) {
  fs::create_directories(out);
  const auto truths = scene_truths(f);
  for (const auto& [id, t] : truths)
    write_dmap((out / (std::to_string(id) + ".dmap")).string(), generate_density(t.points, t.image, kernel));
  return truths.size();
}

inline std::vector<ImageTruth> image_truths(const SceneAnnotationFile& f) {
  std::vector<ImageTruth> out;
  for (const auto& im : f.images) {
    ImageTruth t;
    t.level = im.difficulty;
    for (const auto* a : f.annotations_of(im.id)) {
      t.boxes.push_back({a->box(), a->category});
      t.shopping_list.add(a->category);
    }
    out.push_back(std::move(t));
  }
  return out;
}

inline std::vector<CheckoutImage> checkout_images(std::span<const SynthesizedScene> scenes, std::uint64_t first_id = 0) {
  std::vector<CheckoutImage> out;
  out.reserve(scenes.size());
  for (std::size_t i = 0; i < scenes.size(); ++i) out.push_back({first_id + i, scenes[i].image});
  return out;
}

/// Moves the scene images instead of copying them.
inline std::vector<CheckoutImage> checkout_images(std::vector<SynthesizedScene>&& scenes, std::uint64_t first_id = 0) {
  std::vector<CheckoutImage> out;
  out.reserve(scenes.size());
  for (std::size_t i = 0; i < scenes.size(); ++i) out.push_back({first_id + i, std::move(scenes[i].image)});
  scenes.clear();
  return out;
}

/// Gate verdicts for a dataset under simulated models built from its ground truth.
inline PrimingReport select_dataset(const SceneAnnotationFile& f, const SimulatedModelNoise& noise, std::uint64_t seed,
                                    const PipelineConfig& cfg) {
  const auto truths = scene_truths(f);
  const auto detector = simulated_detector(truths, annotation_categories(f), noise, seed);
  const auto counter = simulated_counter(truths, noise, seed, cfg.kernel());
  std::vector<CheckoutImage> test;
  for (const auto& im : f.images) test.push_back({im.id, {}});
  PrimingConfig pc = cfg.priming();
  pc.iterations = 0;
  return run_priming({}, test, detector, counter, {}, pc, image_truths(f));
}

struct SimulationResult {
  SceneAnnotationFile annotations;
  PrimingReport report;
};

/// Synthesises `scenes` test scenes, builds simulated models from their
/// ground truth and runs the priming loop with no-op training hooks.
inline SimulationResult simulate_e2e(const SceneCatalog& catalog, Difficulty level, std::size_t scenes,
                                     const SimulatedModelNoise& noise, std::uint64_t seed, const PipelineConfig& cfg,
                                     const PrimingHooks& hooks = {}) {
  auto test_scenes = synthesize_dataset(catalog, level, scenes, seed, cfg.synthesis(), InstanceMasks::drop);
  SimulationResult out;
  out.annotations = annotation_file(test_scenes);
  const auto truths = scene_truths(out.annotations);
  std::vector<CategoryId> cats = catalog.categories();
  const auto detector = simulated_detector(truths, cats, noise, mix_seed(seed, 0xD7EC7ULL));
  const auto counter = simulated_counter(truths, noise, mix_seed(seed, 0xC0C47ULL), cfg.kernel());
  const auto test = checkout_images(std::move(test_scenes));
  out.report = run_priming({}, test, detector, counter, hooks, cfg.priming(), image_truths(out.annotations));
  return out;
}

/// Builds a scene catalog from an image folder and a mask folder with
/// matching "<category>_<view>.png" names, keeping views with ratio >= theta_m.
inline SceneCatalog scene_catalog_from_masks(const fs::path& images, const fs::path& masks, double theta_m) {
  const auto records = prune_masks_dir(masks, theta_m);
  std::vector<ExemplarImage> kept;
  for (const auto& r : records) {
    if (!r.realistic) continue;
    const std::string name = exemplar_file_name(r.category, r.view);
    ExemplarImage ex;
    ex.category = r.category;
    ex.view = r.view;
    ex.pixels = read_image((images / name).string());
    ex.mask = read_mask((masks / name).string());
    if (ex.mask->extent() != ex.pixels.extent())
      throw ValidationError("exemplar " + name + ": mask size differs from image");
    kept.push_back(std::move(ex));
  }
  return SceneCatalog(std::move(kept));
}

/// Seeds of the pipeline stages, all derived from the run seed.
struct PipelineSeeds {
  std::uint64_t train = 0;
  std::uint64_t test = 0;
  std::uint64_t models = 0;

  static PipelineSeeds from(std::uint64_t seed) { return {mix_seed(seed, 1), mix_seed(seed, 2), mix_seed(seed, 3)}; }
};

/// The full chain under `out`:
///   catalog/          fixture images, reference masks, catalog.json
///   masks/            extracted masks
///   prune.json        pose-pruning report over the extracted masks
///   train/, test/     synthetic scenes, annotations.json, density/*.dmap
///   report.json       priming report from the simulated models
inline PrimingReport run_pipeline(const PipelineConfig& cfg, const fs::path& out, bool include_timing = false) {
  cfg.validate();
  const auto seeds = PipelineSeeds::from(cfg.seed);
  const Difficulty level = parse_difficulty(cfg.level);

  write_fixture_catalog(out / "catalog", {cfg.catalog_categories, cfg.exemplar_size}, cfg.theta_m);
  extract_masks_dir(out / "catalog" / "images", out / "masks", cfg);
  const auto poses = prune_masks_dir(out / "masks", cfg.theta_m);
  detail::write_text_file((out / "prune.json").string(), to_json(std::span<const PoseRecord>(poses)).dump(2) + "\n");
  const SceneCatalog catalog = scene_catalog_from_masks(out / "catalog" / "images", out / "masks", cfg.theta_m);

  auto train = synthesize_dataset(catalog, level, static_cast<std::size_t>(cfg.train_scenes), seeds.train,
                                  cfg.synthesis(), InstanceMasks::drop);
  auto test = synthesize_dataset(catalog, level, static_cast<std::size_t>(cfg.test_scenes), seeds.test,
                                 cfg.synthesis(), InstanceMasks::drop);
  write_dataset(train, out / "train");
  write_dataset(test, out / "test");
  const auto train_ann = annotation_file(train);
  const auto test_ann = annotation_file(test);
  density_dir(train_ann, cfg.kernel(), out / "train" / "density");
  density_dir(test_ann, cfg.kernel(), out / "test" / "density");

  const auto truths = scene_truths(test_ann);
  const auto detector = simulated_detector(truths, catalog.categories(), cfg.noise, mix_seed(seeds.models, 1));
  const auto counter = simulated_counter(truths, cfg.noise, mix_seed(seeds.models, 2), cfg.kernel());
  const auto report = run_priming(checkout_images(std::move(train)), checkout_images(std::move(test)), detector,
                                  counter, {}, cfg.priming(), image_truths(test_ann));
  detail::write_text_file((out / "report.json").string(), to_json(report, include_timing).dump(2) + "\n");
  return report;
}

}  // namespace priming
