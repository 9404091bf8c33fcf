#pragma once

/// @file mask_extraction.hpp
/// Coarse foreground masks for isolated-item exemplar photos:
/// edge confidence -> threshold -> closing -> hole fill -> small-blob removal
/// -> median smoothing, with a pluggable refinement hook.

#include <cmath>
#include <functional>
#include <memory>
#include <vector>

#include "priming/core.hpp"

namespace priming {

/// Per-pixel edge confidence in [0, 1].
struct EdgeMap {
  int width = 0, height = 0;
  std::vector<double> confidence;

  [[nodiscard]] double at(int x, int y) const {
    return confidence[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)];
  }
};

struct MorphParams {
  double edge_threshold = 0.1;
  int dilate_radius = 3;
  int erode_radius = 3;
  std::size_t min_component_area = 0;
  int median_radius = 2;

  /// Defaults with the small-component floor set to a fraction of the image area.
  static MorphParams for_image(Extent image, double min_area_frac = 0.001) {
    MorphParams p;
    p.min_component_area = static_cast<std::size_t>(
        std::ceil(min_area_frac * double(image.width) * double(image.height)));
    return p;
  }

  void validate() const {
    if (!(edge_threshold >= 0.0 && edge_threshold <= 1.0))
      throw ValidationError("edge threshold must lie in [0, 1]");
    if (dilate_radius < 0 || erode_radius < 0 || median_radius < 0)
      throw ValidationError("morphology radii must be non-negative");
  }
};

inline double luminance(Rgb p) { return 0.299 * p.r + 0.587 * p.g + 0.114 * p.b; }

/// Edge detector interface; a trained contour model can be slotted in here.
class EdgeDetector {
public:
  virtual ~EdgeDetector() = default;
  [[nodiscard]] virtual EdgeMap detect(const RgbImage& image) const = 0;
};

/// Sobel gradient magnitude on luminance, replicate border, normalised so the
/// strongest response is 1.
class SobelEdgeDetector final : public EdgeDetector {
public:
  [[nodiscard]] EdgeMap detect(const RgbImage& image) const override {
    if (image.empty()) throw ValidationError("extract_edges: empty image");
    const int w = image.width(), h = image.height();
    std::vector<double> gray(static_cast<std::size_t>(w) * h);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) gray[static_cast<std::size_t>(y) * w + x] = luminance(image.at(x, y));
    auto g = [&](int x, int y) {
      x = std::clamp(x, 0, w - 1);
      y = std::clamp(y, 0, h - 1);
      return gray[static_cast<std::size_t>(y) * w + x];
    };

    EdgeMap out{w, h, std::vector<double>(gray.size(), 0.0)};
    double peak = 0.0;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double gx = (g(x + 1, y - 1) + 2 * g(x + 1, y) + g(x + 1, y + 1)) -
                          (g(x - 1, y - 1) + 2 * g(x - 1, y) + g(x - 1, y + 1));
        const double gy = (g(x - 1, y + 1) + 2 * g(x, y + 1) + g(x + 1, y + 1)) -
                          (g(x - 1, y - 1) + 2 * g(x, y - 1) + g(x + 1, y - 1));
        const double m = std::hypot(gx, gy);
        out.confidence[static_cast<std::size_t>(y) * w + x] = m;
        peak = std::max(peak, m);
      }
    }
    if (peak > 0)
      for (double& v : out.confidence) v = std::clamp(v / peak, 0.0, 1.0);
    return out;
  }
};

inline EdgeMap extract_edges(const ExemplarImage& image, const EdgeDetector& detector = SobelEdgeDetector{}) {
  return detector.detect(image.pixels);
}

namespace morph {

/// Offsets of a discrete disk of the given radius.
inline std::vector<std::pair<int, int>> disk(int radius) {
  std::vector<std::pair<int, int>> out;
  for (int dy = -radius; dy <= radius; ++dy)
    for (int dx = -radius; dx <= radius; ++dx)
      if (dx * dx + dy * dy <= radius * radius) out.emplace_back(dx, dy);
  return out;
}

inline BinaryMask threshold(const EdgeMap& edges, double theta) {
  BinaryMask out(edges.width, edges.height);
  for (std::size_t i = 0; i < edges.confidence.size(); ++i)
    if (edges.confidence[i] >= theta) out.data()[i] = 1;
  return out;
}

inline BinaryMask dilate(const BinaryMask& in, int radius) {
  if (radius <= 0) return in;
  const auto se = disk(radius);
  BinaryMask out(in.width(), in.height());
  for (int y = 0; y < in.height(); ++y)
    for (int x = 0; x < in.width(); ++x) {
      if (!in.at(x, y)) continue;
      for (auto [dx, dy] : se)
        if (in.in_bounds(x + dx, y + dy)) out.set(x + dx, y + dy);
    }
  return out;
}

/// Pixels outside the image count as foreground, so closing never shrinks
/// shapes touching the border.
inline BinaryMask erode(const BinaryMask& in, int radius) {
  if (radius <= 0) return in;
  const auto se = disk(radius);
  BinaryMask out(in.width(), in.height());
  for (int y = 0; y < in.height(); ++y)
    for (int x = 0; x < in.width(); ++x) {
      if (!in.at(x, y)) continue;
      bool keep = true;
      for (auto [dx, dy] : se) {
        const int nx = x + dx, ny = y + dy;
        if (in.in_bounds(nx, ny) && !in.at(nx, ny)) {
          keep = false;
          break;
        }
      }
      if (keep) out.set(x, y);
    }
  return out;
}

inline BinaryMask close(const BinaryMask& in, int dilate_radius, int erode_radius) {
  return erode(dilate(in, dilate_radius), erode_radius);
}

/// Background regions (4-connected) that do not reach the border become foreground.
inline BinaryMask fill_holes(const BinaryMask& in) {
  const auto bg = label_components(in, 4, false);
  std::vector<char> touches(bg.areas.size() + 1, 0);
  const int w = in.width(), h = in.height();
  for (int x = 0; x < w; ++x) {
    touches[static_cast<std::size_t>(bg.at(x, 0))] = 1;
    touches[static_cast<std::size_t>(bg.at(x, h - 1))] = 1;
  }
  for (int y = 0; y < h; ++y) {
    touches[static_cast<std::size_t>(bg.at(0, y))] = 1;
    touches[static_cast<std::size_t>(bg.at(w - 1, y))] = 1;
  }
  BinaryMask out = in;
  for (std::size_t i = 0; i < bg.labels.size(); ++i) {
    const int l = bg.labels[i];
    if (l > 0 && !touches[static_cast<std::size_t>(l)]) out.data()[i] = 1;
  }
  return out;
}

inline BinaryMask remove_small_components(const BinaryMask& in, std::size_t min_area, int connectivity = 8) {
  if (min_area <= 1) return in;
  const auto fg = label_components(in, connectivity, true);
  BinaryMask out = in;
  for (std::size_t i = 0; i < fg.labels.size(); ++i) {
    const int l = fg.labels[i];
    if (l > 0 && fg.areas[static_cast<std::size_t>(l - 1)] < min_area) out.data()[i] = 0;
  }
  return out;
}

/// Binary median (majority vote) over a (2r+1)^2 window clipped to the image.
inline BinaryMask median(const BinaryMask& in, int radius) {
  if (radius <= 0) return in;
  const int w = in.width(), h = in.height();
  // Summed-area table for O(1) window counts.
  std::vector<int> sat(static_cast<std::size_t>(w + 1) * (h + 1), 0);
  auto S = [&](int x, int y) -> int& { return sat[static_cast<std::size_t>(y) * (w + 1) + x]; };
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) S(x + 1, y + 1) = (in.at(x, y) ? 1 : 0) + S(x, y + 1) + S(x + 1, y) - S(x, y);
  BinaryMask out(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const int xa = std::max(0, x - radius), xb = std::min(w, x + radius + 1);
      const int ya = std::max(0, y - radius), yb = std::min(h, y + radius + 1);
      const int on = S(xb, yb) - S(xa, yb) - S(xb, ya) + S(xa, ya);
      const int total = (xb - xa) * (yb - ya);
      if (2 * on > total) out.set(x, y);
    }
  return out;
}

}  // namespace morph

/// Runs threshold, closing, hole filling, small-component removal and
/// median smoothing, in that order.
inline BinaryMask coarse_mask(const EdgeMap& edges, const MorphParams& params) {
  params.validate();
  BinaryMask m = morph::threshold(edges, params.edge_threshold);
  m = morph::close(m, params.dilate_radius, params.erode_radius);
  m = morph::fill_holes(m);
  m = morph::remove_small_components(m, params.min_component_area);
  return morph::median(m, params.median_radius);
}

/// Fine-mask refinement hook (e.g. a saliency network). Identity by default.
using MaskRefiner = std::function<BinaryMask(const ExemplarImage&, const BinaryMask&)>;

inline BinaryMask identity_refiner(const ExemplarImage&, const BinaryMask& coarse) { return coarse; }

inline BinaryMask refine_mask(const ExemplarImage& image, const BinaryMask& coarse,
                              const MaskRefiner& refiner = identity_refiner) {
  if (coarse.extent() != image.pixels.extent())
    throw ValidationError("refine_mask: mask and image dimensions differ");
  BinaryMask out = refiner ? refiner(image, coarse) : coarse;
  if (out.extent() != coarse.extent())
    throw ValidationError("refine_mask: refiner changed mask dimensions");
  return out;
}

/// Attaches `mask` as the exemplar's opacity; pixels outside it become transparent.
inline ExemplarImage cut_exemplar(const ExemplarImage& image, const BinaryMask& mask) {
  if (mask.extent() != image.pixels.extent())
    throw ValidationError("cut_exemplar: mask and image dimensions differ");
  if (mask.empty()) throw ValidationError("cut_exemplar: empty mask");
  ExemplarImage out = image;
  out.mask = mask;
  return out;
}

/// Full coarse extraction for one exemplar.
inline BinaryMask extract_mask(const ExemplarImage& image, const MorphParams& params,
                               const MaskRefiner& refiner = identity_refiner,
                               const EdgeDetector& detector = SobelEdgeDetector{}) {
  return refine_mask(image, coarse_mask(extract_edges(image, detector), params), refiner);
}

}  // namespace priming
