#pragma once

/// @file catalog_fixture.hpp
/// Procedurally drawn exemplar catalog with exactly known masks. Each
/// category is a flat-coloured shape; its views squash the shape vertically
/// by a per-category factor profile, so the area ratio of view v is
/// factor[v] / max(factor) up to rasterisation.

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "priming/core.hpp"

namespace priming {

struct FixtureOptions {
  int categories = 12;
  int image_size = 96;
};

struct FixtureExemplar {
  ExemplarImage exemplar;  // mask attached: the exact rendered footprint
  std::string name;
  std::string sub_category;
  double squash = 1.0;
  double analytic_ratio = 1.0;
};

namespace detail {

enum class Shape { ellipse, rectangle, triangle, diamond, hexagon, superellipse, cross, capsule };

// Point (u, v) in normalised shape coordinates, both axes in [-1, 1].
inline bool inside_shape(Shape s, double u, double v) {
  const double au = std::abs(u), av = std::abs(v);
  switch (s) {
    case Shape::ellipse: return u * u + v * v <= 1.0;
    case Shape::rectangle: return au <= 0.9 && av <= 0.9;
    case Shape::triangle: return v >= -0.9 && v <= 0.9 && au <= 0.5 * (v + 0.9) + 0.05;
    case Shape::diamond: return au + av <= 1.0;
    case Shape::hexagon: return av <= 0.87 && au + 0.577 * av <= 1.0;
    case Shape::superellipse: return au * au * au * au + av * av * av * av <= 0.8;
    case Shape::cross: return (au <= 0.95 && av <= 0.4) || (au <= 0.4 && av <= 0.95);
    case Shape::capsule: {
      if (au <= 0.5) return av <= 0.8;
      const double du = au - 0.5;
      return du * du / 0.25 + v * v / 0.64 <= 1.0;
    }
  }
  return false;
}

inline constexpr std::array<const char*, 8> kShapeNames{"ellipse", "rectangle", "triangle", "diamond",
                                                        "hexagon", "superellipse", "cross", "capsule"};

inline constexpr std::array<const char*, 4> kSubCategories{"puffed food", "instant drink", "dessert", "personal hygiene"};

// Area profiles; every value stays at least 0.1 away from the 0.45 pruning threshold.
inline const std::vector<std::vector<double>>& squash_profiles() {
  static const std::vector<std::vector<double>> p{
      {1.0, 0.85, 0.7, 0.55, 0.35, 0.2},
      {1.0, 0.9, 0.6, 0.3},
      {1.0, 1.0, 0.75, 0.25},
      {0.8, 1.0, 0.6, 0.3, 0.58},
  };
  return p;
}

inline Rgb category_colour(int k) {
  static constexpr std::array<Rgb, 12> palette{{{200, 30, 30},
                                                {30, 140, 40},
                                                {30, 60, 190},
                                                {220, 160, 20},
                                                {140, 40, 160},
                                                {20, 150, 160},
                                                {230, 90, 20},
                                                {90, 90, 90},
                                                {160, 110, 60},
                                                {230, 60, 140},
                                                {60, 200, 110},
                                                {20, 20, 90}}};
  const Rgb base = palette[static_cast<std::size_t>(k) % palette.size()];
  const int shade = (k / static_cast<int>(palette.size())) * 25;
  auto sub = [&](std::uint8_t c) { return static_cast<std::uint8_t>(std::max(0, int(c) - shade)); };
  return {sub(base.r), sub(base.g), sub(base.b)};
}

}  // namespace detail

/// Renders the fixture catalog. Category ids start at 1.
inline std::vector<FixtureExemplar> make_fixture_catalog(const FixtureOptions& opt = {}) {
  if (opt.categories < 1 || opt.image_size < 16) throw ValidationError("fixture catalog: invalid options");
  std::vector<FixtureExemplar> out;
  const int s = opt.image_size;
  const Rgb backdrop{245, 245, 240};
  for (int k = 0; k < opt.categories; ++k) {
    const auto shape = static_cast<detail::Shape>(k % 8);
    const auto& profile = detail::squash_profiles()[static_cast<std::size_t>(k) % detail::squash_profiles().size()];
    const double peak = *std::max_element(profile.begin(), profile.end());
    const Rgb colour = detail::category_colour(k);
    const Rgb stripe{static_cast<std::uint8_t>(colour.r / 2), static_cast<std::uint8_t>(colour.g / 2),
                     static_cast<std::uint8_t>(colour.b / 2)};
    for (std::size_t v = 0; v < profile.size(); ++v) {
      const double a = 0.42 * s;
      const double b = 0.42 * s * profile[v];
      FixtureExemplar fx;
      fx.exemplar.category = CategoryId(k + 1);
      fx.exemplar.view = static_cast<int>(v);
      fx.exemplar.pixels = RgbImage(s, s, backdrop);
      BinaryMask mask(s, s);
      for (int y = 0; y < s; ++y)
        for (int x = 0; x < s; ++x) {
          const double u = (x + 0.5 - 0.5 * s) / a;
          const double w = (y + 0.5 - 0.5 * s) / b;
          if (!detail::inside_shape(shape, u, w)) continue;
          mask.set(x, y);
          // A label band across the middle gives the item some internal texture.
          fx.exemplar.pixels.at(x, y) = std::abs(u) < 0.25 ? stripe : colour;
        }
      fx.exemplar.mask = std::move(mask);
      fx.name = std::string(detail::kShapeNames[static_cast<std::size_t>(k) % 8]) + "-" + std::to_string(k + 1);
      fx.sub_category = detail::kSubCategories[static_cast<std::size_t>(k) % detail::kSubCategories.size()];
      fx.squash = profile[v];
      fx.analytic_ratio = profile[v] / peak;
      out.push_back(std::move(fx));
    }
  }
  return out;
}

}  // namespace priming
