#pragma once

/// @file cli.hpp
/// The `priming` command-line tool. Exit codes: 0 success, 1 validation or
/// usage error, 2 runtime failure. Every run echoes the resolved config and
/// seeds to the output stream before doing any work.
///
/// Config resolution: built-in defaults, then the file named by --config (or
/// by the PRIMING_CONFIG environment variable), then explicit flags.

#include <cstdlib>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "priming/pipeline.hpp"

namespace priming {

namespace detail {

struct CliState {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::function<int(PipelineConfig&)> run;
};

inline PipelineConfig base_config(const std::string& explicit_path) {
  if (!explicit_path.empty()) return load_config(explicit_path);
  if (const char* env = std::getenv(kConfigEnvVar); env && *env) return load_config(env);
  return {};
}

inline void echo_config(std::ostream& out, const PipelineConfig& cfg) {
  out << "config: " << to_json(cfg).dump() << "\n";
  out << "seed: " << cfg.seed << "\n";
}

template <typename T>
void override_if(const std::optional<T>& flag, T& dst) {
  if (flag) dst = *flag;
}

inline void print_metrics(std::ostream& out, const MetricValues& m) {
  out << "cAcc " << m.cacc << "  ACD " << m.acd << "  mCCD " << m.mccd << "  mCIoU " << m.mciou << "  mAP50 "
      << m.map50 << "  mmAP " << m.mmap << "  (" << m.images << " images)\n";
}

inline void print_priming(std::ostream& out, const PrimingReport& r) {
  out << "selected " << r.selected << " of " << r.test_images << " test images\n";
  if (r.selection_precision) out << "selected list accuracy " << *r.selection_precision << "\n";
  if (r.rejected_list_accuracy) out << "rejected list accuracy " << *r.rejected_list_accuracy << "\n";
  if (r.metrics) print_metrics(out, r.metrics->overall);
}

inline SimulatedModelNoise load_noise(const std::string& path) {
  try {
    return noise_from_json(read_json_file(path));
  } catch (const ValidationError& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

}  // namespace detail

/// Runs the tool; argv[0] is the program name.
inline int cli_main(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Data-priming pipeline for automatic checkout scenes", "priming"};
  app.require_subcommand(1);
  app.fallthrough();
  detail::CliState state;
  app.add_option("--config", state.config_path,
                 std::string("JSON config file (default: $") + kConfigEnvVar + ")");
  app.add_option("--seed", state.seed, "Run seed; overrides the config");

  // --- extract-masks
  auto* extract = app.add_subcommand("extract-masks", "Coarse foreground masks for a folder of exemplar images");
  std::string ex_in, ex_out;
  std::optional<double> ex_edge, ex_min_area;
  std::optional<int> ex_dilate, ex_erode, ex_median;
  extract->add_option("--input", ex_in, "Folder of PNG/JPEG exemplars")->required();
  extract->add_option("--output", ex_out, "Folder for the mask PNGs")->required();
  extract->add_option("--edge-threshold", ex_edge, "Edge threshold in [0, 1]");
  extract->add_option("--dilate", ex_dilate, "Dilation radius");
  extract->add_option("--erode", ex_erode, "Erosion radius");
  extract->add_option("--min-area-frac", ex_min_area, "Smallest kept component, as a fraction of the image");
  extract->add_option("--median", ex_median, "Median filter radius");
  extract->callback([&] {
    state.run = [&](PipelineConfig& cfg) {
      detail::override_if(ex_edge, cfg.edge_threshold);
      detail::override_if(ex_min_area, cfg.min_area_frac);
      detail::override_if(ex_dilate, cfg.dilate_radius);
      detail::override_if(ex_erode, cfg.erode_radius);
      detail::override_if(ex_median, cfg.median_radius);
      cfg.validate();
      detail::echo_config(out, cfg);
      const auto n = extract_masks_dir(ex_in, ex_out, cfg);
      out << "wrote " << n << " masks to " << ex_out << "\n";
      return 0;
    };
  });

  // --- prune
  auto* prune = app.add_subcommand("prune", "Score exemplar views by mask area and drop unrealistic poses");
  std::string pr_masks, pr_report;
  std::optional<double> pr_theta;
  prune->add_option("--masks", pr_masks, "Folder of <category>_<view>.png masks")->required();
  prune->add_option("--theta-m", pr_theta, "Area-ratio threshold");
  prune->add_option("--report", pr_report, "Output JSON report")->required();
  prune->callback([&] {
    state.run = [&](PipelineConfig& cfg) {
      detail::override_if(pr_theta, cfg.theta_m);
      cfg.validate();
      detail::echo_config(out, cfg);
      const auto records = prune_masks_dir(pr_masks, cfg.theta_m);
      detail::write_text_file(pr_report, to_json(std::span<const PoseRecord>(records)).dump(2) + "\n");
      const auto kept = std::count_if(records.begin(), records.end(), [](const auto& r) { return r.realistic; });
      out << "kept " << kept << " of " << records.size() << " views\n";
      return 0;
    };
  });

  // --- make-catalog
  auto* make_cat = app.add_subcommand("make-catalog", "Write the bundled procedural exemplar catalog");
  std::string mc_out;
  std::optional<int> mc_categories, mc_size;
  make_cat->add_option("--out", mc_out, "Output folder")->required();
  make_cat->add_option("--categories", mc_categories, "Number of categories");
  make_cat->add_option("--size", mc_size, "Exemplar image side in pixels");
  make_cat->callback([&] {
    state.run = [&](PipelineConfig& cfg) {
      detail::override_if(mc_categories, cfg.catalog_categories);
      detail::override_if(mc_size, cfg.exemplar_size);
      cfg.validate();
      detail::echo_config(out, cfg);
      const auto m = write_fixture_catalog(mc_out, {cfg.catalog_categories, cfg.exemplar_size}, cfg.theta_m);
      out << "wrote " << m.exemplars.size() << " exemplars in " << m.categories.size() << " categories\n";
      return 0;
    };
  });

  // --- synthesize
  auto* synth = app.add_subcommand("synthesize", "Generate synthetic checkout scenes from a catalog");
  std::string sy_catalog, sy_out;
  std::optional<std::string> sy_level;
  std::optional<int> sy_count;
  synth->add_option("--catalog", sy_catalog, "Catalog folder containing catalog.json")->required();
  synth->add_option("--level", sy_level, "easy, medium or hard");
  synth->add_option("--count", sy_count, "Number of scenes");
  synth->add_option("--out", sy_out, "Output folder")->required();
  synth->callback([&] {
    state.run = [&](PipelineConfig& cfg) {
      detail::override_if(sy_level, cfg.level);
      detail::override_if(sy_count, cfg.test_scenes);
      cfg.validate();
      detail::echo_config(out, cfg);
      out << "scene seeds: mix_seed(" << cfg.seed << ", i) for i in [0, " << cfg.test_scenes << ")\n";
      const auto catalog = load_scene_catalog(sy_catalog, cfg.theta_m);
      const auto scenes = synthesize_dataset(catalog, parse_difficulty(cfg.level),
                                             static_cast<std::size_t>(cfg.test_scenes), cfg.seed, cfg.synthesis(),
                                             InstanceMasks::drop);
      write_dataset(scenes, sy_out);
      out << "wrote " << scenes.size() << " " << cfg.level << " scenes to " << sy_out << "\n";
      return 0;
    };
  });

  // --- density
  auto* density = app.add_subcommand("density", "Write ground-truth density maps (.dmap) for an annotation file");
  std::string de_ann, de_out;
  std::optional<double> de_sigma;
  density->add_option("--annotations", de_ann, "annotations.json")->required();
  density->add_option("--sigma", de_sigma, "Gaussian kernel sigma in density cells");
  density->add_option("--out", de_out, "Output folder")->required();
  density->callback([&] {
    state.run = [&](PipelineConfig& cfg) {
      detail::override_if(de_sigma, cfg.sigma);
      if (de_sigma && cfg.truncation_radius < 3.0 * cfg.sigma) cfg.truncation_radius = 3.0 * cfg.sigma;
      cfg.validate();
      detail::echo_config(out, cfg);
      const auto n = density_dir(load_annotations(de_ann), cfg.kernel(), de_out);
      out << "wrote " << n << " density maps to " << de_out << "\n";
      return 0;
    };
  });

  // --- select
  auto* select = app.add_subcommand("select", "Gate a dataset with simulated detector and counter models");
  std::string se_dataset, se_noise, se_report;
  std::optional<double> se_theta_p, se_nms;
  select->add_option("--dataset", se_dataset, "Dataset folder containing annotations.json")->required();
  select->add_option("--model-sim", se_noise, "JSON noise model for the simulated models");
  select->add_option("--theta-p", se_theta_p, "Detection confidence threshold");
  select->add_option("--nms-iou", se_nms, "Class-wise NMS IoU threshold");
  select->add_option("--report", se_report, "Output JSON report")->required();
  select->callback([&] {
    state.run = [&](PipelineConfig& cfg) {
      if (!se_noise.empty()) cfg.noise = detail::load_noise(se_noise);
      detail::override_if(se_theta_p, cfg.theta_p);
      detail::override_if(se_nms, cfg.nms_iou);
      cfg.validate();
      detail::echo_config(out, cfg);
      const auto ann = load_annotations((fs::path(se_dataset) / "annotations.json").string());
      const auto report = select_dataset(ann, cfg.noise, cfg.seed, cfg);
      detail::write_text_file(se_report, to_json(report).dump(2) + "\n");
      detail::print_priming(out, report);
      return 0;
    };
  });

  // --- evaluate
  auto* eval = app.add_subcommand("evaluate", "Score predictions against ground truth");
  std::string ev_pred, ev_gt, ev_report;
  eval->add_option("--pred", ev_pred, "Predictions in annotation format, with scores")->required();
  eval->add_option("--gt", ev_gt, "Ground-truth annotations")->required();
  eval->add_option("--report", ev_report, "Output JSON report")->required();
  eval->callback([&] {
    state.run = [&](PipelineConfig& cfg) {
      cfg.validate();
      detail::echo_config(out, cfg);
      const auto gt = load_annotations(ev_gt);
      const auto pred = load_annotations(ev_pred, ListCheck::lenient);
      std::set<std::uint64_t> known;
      for (const auto& im : gt.images) known.insert(im.id);
      for (const auto& a : pred.annotations)
        if (!known.count(a.image_id))
          throw ValidationError(ev_pred + ": prediction for image " + std::to_string(a.image_id) +
                                " which is not in the ground truth");
      std::vector<EvalImage> images;
      for (const auto& im : gt.images) {
        EvalImage e;
        e.level = im.difficulty;
        for (const auto* a : gt.annotations_of(im.id)) {
          e.gt_boxes.push_back({a->box(), a->category});
          e.ground_truth.add(a->category);
        }
        for (const auto* a : pred.annotations_of(im.id)) e.detections.push_back({a->box(), a->category, a->score.value_or(1.0)});
        e.predicted = tally_from_detections(e.detections, cfg.tally_threshold);
        images.push_back(std::move(e));
      }
      const auto report = evaluate(images);
      detail::write_text_file(ev_report, to_json(report).dump(2) + "\n");
      detail::print_metrics(out, report.overall);
      return 0;
    };
  });

  // --- simulate-e2e
  auto* sim = app.add_subcommand("simulate-e2e", "Synthesise a test set and run the priming loop with simulated models");
  std::string si_noise, si_report, si_catalog;
  std::optional<std::string> si_level;
  std::optional<int> si_scenes, si_train;
  bool si_timings = false;
  sim->add_option("--level", si_level, "easy, medium or hard");
  sim->add_option("--scenes", si_scenes, "Number of test scenes");
  sim->add_option("--train-scenes", si_train, "Number of synthetic training scenes");
  sim->add_option("--noise", si_noise, "JSON noise model for the simulated models");
  sim->add_option("--catalog", si_catalog, "Catalog folder (default: the bundled procedural catalog)");
  sim->add_option("--report", si_report, "Output JSON report")->required();
  sim->add_flag("--timings", si_timings, "Include phase timings in the report");
  sim->callback([&] {
    state.run = [&](PipelineConfig& cfg) {
      if (!si_noise.empty()) cfg.noise = detail::load_noise(si_noise);
      detail::override_if(si_level, cfg.level);
      detail::override_if(si_scenes, cfg.test_scenes);
      cfg.train_scenes = si_train.value_or(0);
      cfg.validate();
      detail::echo_config(out, cfg);
      const auto catalog = si_catalog.empty()
                               ? fixture_scene_catalog({cfg.catalog_categories, cfg.exemplar_size}, cfg.theta_m)
                               : load_scene_catalog(si_catalog, cfg.theta_m);
      const auto result = simulate_e2e(catalog, parse_difficulty(cfg.level), static_cast<std::size_t>(cfg.test_scenes),
                                       cfg.noise, cfg.seed, cfg);
      auto report = result.report;
      report.train_images = static_cast<std::size_t>(cfg.train_scenes);
      detail::write_text_file(si_report, to_json(report, si_timings).dump(2) + "\n");
      detail::print_priming(out, report);
      return 0;
    };
  });

  // --- pipeline
  auto* pipe = app.add_subcommand("pipeline", "Run the full chain from a single config file");
  std::string pi_out;
  bool pi_timings = false;
  pipe->add_option("--out", pi_out, "Output folder")->required();
  pipe->add_flag("--timings", pi_timings, "Include phase timings in the report");
  pipe->callback([&] {
    state.run = [&](PipelineConfig& cfg) {
      cfg.validate();
      detail::echo_config(out, cfg);
      const auto seeds = PipelineSeeds::from(cfg.seed);
      out << "seeds: train " << seeds.train << ", test " << seeds.test << ", models " << seeds.models << "\n";
      const auto report = run_pipeline(cfg, pi_out, pi_timings);
      detail::print_priming(out, report);
      out << "outputs in " << pi_out << "\n";
      return 0;
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n\n" << app.help();
    return 1;
  }

  try {
    PipelineConfig cfg = detail::base_config(state.config_path);
    if (state.seed) cfg.seed = *state.seed;
    return state.run(cfg);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "runtime failure: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace priming
