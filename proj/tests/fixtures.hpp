#pragma once

// Randomised fixtures shared by the unit tests and the acceptance binary.

#include <fstream>
#include <random>
#include <string>
#include <unistd.h>
#include <vector>

#include "priming/dataset_io.hpp"

namespace fixtures {

using namespace priming;

class TempDir {
public:
  TempDir() {
    static int counter = 0;
    path_ = fs::temp_directory_path() /
            ("priming_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  [[nodiscard]] const fs::path& path() const { return path_; }
  [[nodiscard]] std::string file(const std::string& name) const { return (path_ / name).string(); }

private:
  fs::path path_;
};

inline void touch(const fs::path& p) {
  fs::create_directories(p.parent_path());
  std::ofstream(p) << "x";
}

inline void write_text(const std::string& path, const std::string& text) { std::ofstream(path) << text; }

template <typename Fn>
std::string error_of(Fn fn) {
  try {
    fn();
  } catch (const ValidationError& e) {
    return e.what();
  }
  return "";
}

inline CatalogManifest random_catalog(std::mt19937_64& rng, const fs::path& dir) {
  std::uniform_int_distribution<int> n_cat(1, 6), n_view(1, 5), area(1, 5000);
  std::uniform_real_distribution<double> unit(0, 1);
  CatalogManifest m;
  m.theta_m = unit(rng);
  const int cats = n_cat(rng);
  for (int k = 0; k < cats; ++k) {
    const CategoryId id(1 + 3 * k + int(rng() % 3));
    m.categories.push_back({id, "item \"" + std::to_string(id.value) + "\" é", k % 2 ? "dessert" : ""});
    std::vector<double> areas;
    const int views = n_view(rng);
    for (int v = 0; v < views; ++v) areas.push_back(area(rng) + unit(rng));
    const auto ratios = pose_ratios(areas);
    for (int v = 0; v < views; ++v) {
      ExemplarRecord e;
      e.category = id;
      e.view = v;
      e.image = "images/" + std::to_string(id.value) + "_" + std::to_string(v) + ".png";
      touch(dir / e.image);
      if (v % 2 == 0) {
        e.mask = "masks/" + std::to_string(id.value) + "_" + std::to_string(v) + ".png";
        touch(dir / e.mask);
      }
      if (k % 3 != 2) {
        e.area = areas[std::size_t(v)];
        e.ratio = ratios[std::size_t(v)];
        e.realistic = *e.ratio >= *m.theta_m;
      }
      m.exemplars.push_back(e);
    }
  }
  return m;
}

inline SceneAnnotationFile random_annotations(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> n_img(0, 6), n_ann(0, 8), cat(1, 9);
  std::uniform_real_distribution<double> pos(0, 500), size(0, 120);
  SceneAnnotationFile f;
  const int images = n_img(rng);
  for (int i = 0; i < images; ++i) {
    const std::uint64_t id = 1000 * std::uint64_t(i) + rng() % 1000;
    f.images.push_back({id, "images/" + std::to_string(id) + ".png", 1 + int(rng() % 2000), 1 + int(rng() % 2000),
                        i % 2 ? "hard" : "easy", rng()});
    ShoppingList l;
    for (int k = n_ann(rng); k > 0; --k) {
      AnnotationRecord a;
      a.image_id = id;
      a.category = CategoryId(cat(rng));
      a.bbox = {pos(rng), pos(rng), size(rng), size(rng)};
      a.point = {pos(rng), pos(rng)};
      if (k % 3 == 0) a.score = std::uniform_real_distribution<double>(0, 1)(rng);
      f.annotations.push_back(a);
      l.add(a.category);
    }
    f.shopping_lists[id] = l;
  }
  return f;
}

inline PrimingReport random_report(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0, 1);
  PrimingReport r;
  for (const char* name : {"train", "select", "remove_counter", "fine_tune", "evaluate"})
    r.phases.push_back({name, int(rng() % 4), 0.0});
  r.train_images = rng() % 50;
  r.test_images = 1 + rng() % 50;
  for (std::size_t i = 0; i < r.test_images; ++i) {
    ReliabilityVerdict v;
    v.raw_count = 20 * unit(rng);
    v.density_count = round_count(v.raw_count);
    v.confident_detections = int(rng() % 20);
    v.reliable = v.density_count == v.confident_detections;
    r.selected += v.reliable;
    r.verdicts.push_back(v);
  }
  r.fine_tuned = r.selected > 0;
  if (r.selected) r.selection_precision = unit(rng);
  if (r.selected < r.test_images) r.rejected_list_accuracy = unit(rng);
  if (rng() % 2) {
    MetricsReport m;
    auto vals = [&] {
      return MetricValues{unit(rng), 5 * unit(rng), unit(rng), unit(rng), unit(rng), unit(rng), std::size_t(rng() % 99)};
    };
    m.overall = vals();
    m.per_level["easy"] = vals();
    m.per_level["medium"] = vals();
    r.metrics = m;
  }
  return r;
}

inline bool same(const MetricValues& a, const MetricValues& b) {
  return a.cacc == b.cacc && a.acd == b.acd && a.mccd == b.mccd && a.mciou == b.mciou && a.map50 == b.map50 &&
         a.mmap == b.mmap && a.images == b.images;
}

inline ShoppingList random_list(std::mt19937_64& rng, int categories) {
  std::uniform_int_distribution<int> n(0, 3);
  ShoppingList l;
  for (int c = 1; c <= categories; ++c) l.add(CategoryId(c), n(rng));
  return l;
}

struct DetFixture {
  std::vector<std::vector<Detection>> dets;
  std::vector<std::vector<BoxAnnotation>> gts;
};

inline DetFixture random_detections(std::mt19937_64& rng, int images, int categories, int max_dets) {
  std::uniform_real_distribution<double> pos(0, 60), size(8, 30), unit(0, 1), jit(-6, 6);
  std::uniform_int_distribution<int> cat(1, categories), n_gt(0, 4), img(0, images - 1);
  DetFixture f;
  f.dets.resize(std::size_t(images));
  f.gts.resize(std::size_t(images));
  for (auto& g : f.gts)
    for (int k = n_gt(rng); k > 0; --k) {
      const double x = pos(rng), y = pos(rng);
      g.push_back({{x, y, x + size(rng), y + size(rng)}, CategoryId(cat(rng))});
    }
  const int n = std::uniform_int_distribution<int>(0, max_dets)(rng);
  for (int k = 0; k < n; ++k) {
    auto& d = f.dets[std::size_t(img(rng))];
    const std::size_t i = &d - f.dets.data();
    // Mostly near some GT box so matches happen at several IoU levels.
    if (!f.gts[i].empty() && unit(rng) < 0.7) {
      const auto& g = f.gts[i][std::size_t(std::uniform_int_distribution<int>(0, int(f.gts[i].size()) - 1)(rng))];
      const double dx = jit(rng), dy = jit(rng);
      const CategoryId c = unit(rng) < 0.8 ? g.category : CategoryId(cat(rng));
      // Quantized scores create ties.
      d.push_back({{g.box.x_min + dx, g.box.y_min + dy, g.box.x_max + dx, g.box.y_max + dy}, c, std::round(unit(rng) * 10) / 10});
    } else {
      const double x = pos(rng), y = pos(rng);
      d.push_back({{x, y, x + size(rng), y + size(rng)}, CategoryId(cat(rng)), std::round(unit(rng) * 10) / 10});
    }
  }
  return f;
}

}  // namespace fixtures
