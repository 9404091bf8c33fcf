#pragma once

/// @file core.hpp
/// Shared geometric and catalog types used by every stage of the checkout
/// data-priming pipeline: binary masks, boxes, poses and RGB rasters, plus
/// the primitive operations on them (IoU, affine mask warps, connected
/// components, extents and centroids).
///
/// Coordinates have their origin at the top-left corner, x grows rightward
/// and y downward. Pixel (x, y) covers the continuous square
/// [x, x+1) x [y, y+1). Box corners are continuous; centroids are reported
/// in pixel-index coordinates.

#include <algorithm>
#include <array>
#include <cmath>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <map>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace priming {

/// Raised when an input violates a documented contract (bad dimensions,
/// out-of-range parameters, malformed files). The CLI maps it to exit 1.
class ValidationError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Product category. Zero is the background class; real items are >= 1.
struct CategoryId {
  int value = 0;

  constexpr CategoryId() = default;
  constexpr explicit CategoryId(int v) : value(v) {}

  [[nodiscard]] constexpr bool is_background() const { return value == 0; }

  friend constexpr auto operator<=>(CategoryId, CategoryId) = default;
};

inline constexpr CategoryId kBackground{0};

struct Extent {
  int width = 0;
  int height = 0;

  friend constexpr bool operator==(Extent, Extent) = default;
};

/// Row-major boolean grid.
class BinaryMask {
public:
  BinaryMask() = default;

  BinaryMask(int width, int height, bool fill = false)
      : width_(width), height_(height),
        bits_(static_cast<std::size_t>(check_dim(width) * check_dim(height)), fill ? 1 : 0) {}

  [[nodiscard]] int width() const { return width_; }
  [[nodiscard]] int height() const { return height_; }
  [[nodiscard]] Extent extent() const { return {width_, height_}; }
  [[nodiscard]] std::size_t size() const { return bits_.size(); }

  [[nodiscard]] bool in_bounds(int x, int y) const {
    return x >= 0 && y >= 0 && x < width_ && y < height_;
  }

  [[nodiscard]] bool at(int x, int y) const { return bits_[index(x, y)] != 0; }
  void set(int x, int y, bool v = true) { bits_[index(x, y)] = v ? 1 : 0; }

  [[nodiscard]] bool operator[](std::size_t i) const { return bits_[i] != 0; }

  [[nodiscard]] std::size_t popcount() const {
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
  }
  [[nodiscard]] bool empty() const { return popcount() == 0; }

  [[nodiscard]] const std::vector<std::uint8_t>& data() const { return bits_; }
  [[nodiscard]] std::vector<std::uint8_t>& data() { return bits_; }

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

private:
  static int check_dim(int d) {
    if (d <= 0) throw ValidationError("mask dimensions must be positive");
    return d;
  }
  [[nodiscard]] std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> bits_;
};

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  friend constexpr bool operator==(Rgb, Rgb) = default;
};

/// Interleaved 8-bit RGB raster.
class RgbImage {
public:
  RgbImage() = default;
  RgbImage(int width, int height, Rgb fill = {})
      : width_(width), height_(height) {
    if (width <= 0 || height <= 0) throw ValidationError("image dimensions must be positive");
    pixels_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
  }

  [[nodiscard]] int width() const { return width_; }
  [[nodiscard]] int height() const { return height_; }
  [[nodiscard]] Extent extent() const { return {width_, height_}; }
  [[nodiscard]] bool empty() const { return pixels_.empty(); }

  [[nodiscard]] Rgb at(int x, int y) const { return pixels_[index(x, y)]; }
  [[nodiscard]] Rgb& at(int x, int y) { return pixels_[index(x, y)]; }

  [[nodiscard]] const std::vector<Rgb>& pixels() const { return pixels_; }
  [[nodiscard]] std::vector<Rgb>& pixels() { return pixels_; }

  friend bool operator==(const RgbImage&, const RgbImage&) = default;

private:
  [[nodiscard]] std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<Rgb> pixels_;
};

/// Axis-aligned box in continuous corner form.
struct BBox {
  double x_min = 0, y_min = 0, x_max = 0, y_max = 0;

  [[nodiscard]] double width() const { return x_max - x_min; }
  [[nodiscard]] double height() const { return y_max - y_min; }
  [[nodiscard]] double area() const { return std::max(0.0, width()) * std::max(0.0, height()); }
  [[nodiscard]] bool valid() const { return x_min <= x_max && y_min <= y_max; }
  [[nodiscard]] double center_x() const { return 0.5 * (x_min + x_max); }
  [[nodiscard]] double center_y() const { return 0.5 * (y_min + y_max); }

  friend bool operator==(const BBox&, const BBox&) = default;
};

struct Point2 {
  double x = 0, y = 0;
  friend bool operator==(const Point2&, const Point2&) = default;
};

/// Detector output and pseudo-label unit: box, category (> 0) and confidence in [0, 1].
struct Detection {
  BBox box;
  CategoryId category;
  double score = 1.0;

  friend bool operator==(const Detection&, const Detection&) = default;
};

/// Ground-truth box annotation.
struct BoxAnnotation {
  BBox box;
  CategoryId category;
  friend bool operator==(const BoxAnnotation&, const BoxAnnotation&) = default;
};

/// Ground-truth point (instance centre) annotation.
struct PointAnnotation {
  Point2 point;
  CategoryId category;
  friend bool operator==(const PointAnnotation&, const PointAnnotation&) = default;
};

/// A single-item source-domain photo keyed by (category, view). When a mask
/// is attached, pixels outside it are transparent for composition.
struct ExemplarImage {
  CategoryId category;
  int view = 0;
  RgbImage pixels;
  std::optional<BinaryMask> mask;

  [[nodiscard]] std::size_t opaque_count() const {
    return mask ? mask->popcount() : pixels.pixels().size();
  }
};

/// Rotation about the source center, uniform scale, then translation.
/// Identity is {0, 1, 0, 0}.
struct AffinePose {
  double rotation_deg = 0.0;
  double scale = 1.0;
  double tx = 0.0;
  double ty = 0.0;

  friend bool operator==(const AffinePose&, const AffinePose&) = default;
};

/// Wraps an angle into [0, 360).
inline double normalize_degrees(double deg) {
  double r = std::fmod(deg, 360.0);
  if (r < 0) r += 360.0;
  if (r >= 360.0) r = 0.0;
  return r;
}

inline double iou(const BBox& a, const BBox& b) {
  const double ix = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const double iy = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  const double inter = (ix > 0 && iy > 0) ? ix * iy : 0.0;
  const double uni = a.area() + b.area() - inter;
  if (uni <= 0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

namespace detail {

struct SinCos {
  double s, c;
};

// Exact values on the quarter turns keep 90/180/270 rotations lossless.
inline SinCos exact_sincos(double deg) {
  const double d = normalize_degrees(deg);
  if (d == 0.0) return {0.0, 1.0};
  if (d == 90.0) return {1.0, 0.0};
  if (d == 180.0) return {0.0, -1.0};
  if (d == 270.0) return {-1.0, 0.0};
  const double r = d * std::numbers::pi / 180.0;
  return {std::sin(r), std::cos(r)};
}

}  // namespace detail

/// Inverse-mapping nearest-neighbour warp. Calls visit(cx, cy, sx, sy) for
/// every canvas pixel (cx, cy) inside `canvas` whose centre maps back onto a
/// source pixel (sx, sy) of a `source`-sized raster. Translations are in
/// canvas pixels; rotation and scale act about the source centre.
template <typename Visit>
void warp_pixels(Extent source, const AffinePose& pose, Extent canvas, Visit&& visit) {
  if (!(pose.scale > 0.0)) throw ValidationError("pose scale must be positive");
  if (canvas.width <= 0 || canvas.height <= 0) throw ValidationError("canvas dimensions must be positive");

  const auto [s, c] = detail::exact_sincos(pose.rotation_deg);
  const double cx0 = 0.5 * source.width;
  const double cy0 = 0.5 * source.height;
  const double ox = cx0 + pose.tx;
  const double oy = cy0 + pose.ty;

  // Forward-map the source corners to bound the canvas region.
  double min_x = 1e300, max_x = -1e300, min_y = 1e300, max_y = -1e300;
  const std::array<std::pair<double, double>, 4> corners{
      {{0.0, 0.0}, {double(source.width), 0.0}, {0.0, double(source.height)},
       {double(source.width), double(source.height)}}};
  for (auto [px, py] : corners) {
    const double dx = (px - cx0) * pose.scale;
    const double dy = (py - cy0) * pose.scale;
    const double qx = c * dx - s * dy + ox;
    const double qy = s * dx + c * dy + oy;
    min_x = std::min(min_x, qx);
    max_x = std::max(max_x, qx);
    min_y = std::min(min_y, qy);
    max_y = std::max(max_y, qy);
  }
  const int x0 = std::max(0, static_cast<int>(std::floor(min_x)) - 1);
  const int y0 = std::max(0, static_cast<int>(std::floor(min_y)) - 1);
  const int x1 = std::min(canvas.width, static_cast<int>(std::ceil(max_x)) + 1);
  const int y1 = std::min(canvas.height, static_cast<int>(std::ceil(max_y)) + 1);

  const double inv = 1.0 / pose.scale;
  for (int y = y0; y < y1; ++y) {
    const double qy = y + 0.5 - oy;
    for (int x = x0; x < x1; ++x) {
      const double qx = x + 0.5 - ox;
      // Inverse rotation, then inverse scale.
      const double px = (c * qx + s * qy) * inv + cx0;
      const double py = (-s * qx + c * qy) * inv + cy0;
      const int sx = static_cast<int>(std::floor(px));
      const int sy = static_cast<int>(std::floor(py));
      if (sx < 0 || sy < 0 || sx >= source.width || sy >= source.height) continue;
      visit(x, y, sx, sy);
    }
  }
}

/// Rotates, scales and translates `mask` onto a canvas of the given size.
/// Pixels landing outside the canvas are clipped.
inline BinaryMask transform_mask(const BinaryMask& mask, const AffinePose& pose, Extent canvas) {
  if (canvas.width <= 0 || canvas.height <= 0) throw ValidationError("canvas dimensions must be positive");
  BinaryMask out(canvas.width, canvas.height);
  warp_pixels(mask.extent(), pose, canvas, [&](int x, int y, int sx, int sy) {
    if (mask.at(sx, sy)) out.set(x, y);
  });
  return out;
}

/// Per-pixel component labels (0 = unlabeled, components numbered from 1)
/// together with the area of each component.
struct ComponentLabels {
  int width = 0, height = 0;
  std::vector<int> labels;
  std::vector<std::size_t> areas;  // areas[i] is the area of label i+1

  [[nodiscard]] int at(int x, int y) const {
    return labels[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)];
  }
};

/// Labels the connected regions of pixels whose value equals `foreground`.
/// Connectivity must be 4 or 8.
inline ComponentLabels label_components(const BinaryMask& mask, int connectivity = 8, bool foreground = true) {
  if (connectivity != 4 && connectivity != 8) throw ValidationError("connectivity must be 4 or 8");
  ComponentLabels out;
  out.width = mask.width();
  out.height = mask.height();
  out.labels.assign(mask.size(), 0);
  if (mask.size() == 0) return out;

  static constexpr std::array<std::pair<int, int>, 8> kNeighbours{
      {{1, 0}, {-1, 0}, {0, 1}, {0, -1}, {1, 1}, {1, -1}, {-1, 1}, {-1, -1}}};
  const int n_neigh = connectivity;
  const int w = mask.width();
  std::vector<int> stack;
  int next = 0;
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t idx = static_cast<std::size_t>(y) * w + x;
      if (mask[idx] != foreground || out.labels[idx] != 0) continue;
      ++next;
      std::size_t area = 0;
      out.labels[idx] = next;
      stack.push_back(static_cast<int>(idx));
      while (!stack.empty()) {
        const int cur = stack.back();
        stack.pop_back();
        ++area;
        const int px = cur % w, py = cur / w;
        for (int k = 0; k < n_neigh; ++k) {
          const int nx = px + kNeighbours[k].first, ny = py + kNeighbours[k].second;
          if (!mask.in_bounds(nx, ny)) continue;
          const std::size_t nidx = static_cast<std::size_t>(ny) * w + nx;
          if (mask[nidx] != foreground || out.labels[nidx] != 0) continue;
          out.labels[nidx] = next;
          stack.push_back(static_cast<int>(nidx));
        }
      }
      out.areas.push_back(area);
    }
  }
  return out;
}

struct Component {
  BinaryMask mask;
  std::size_t area = 0;
};

/// Splits the set bits of `mask` into connected components, in raster order
/// of each component's first pixel.
inline std::vector<Component> connected_components(const BinaryMask& mask, int connectivity = 8) {
  const auto labels = label_components(mask, connectivity);
  std::vector<Component> out;
  out.reserve(labels.areas.size());
  for (std::size_t i = 0; i < labels.areas.size(); ++i)
    out.push_back({BinaryMask(mask.width(), mask.height()), labels.areas[i]});
  for (std::size_t idx = 0; idx < labels.labels.size(); ++idx) {
    if (const int l = labels.labels[idx]; l > 0) out[static_cast<std::size_t>(l - 1)].mask.data()[idx] = 1;
  }
  return out;
}

/// Tight extent of the set bits; pixel (x, y) contributes [x, x+1) x [y, y+1).
inline BBox mask_bbox(const BinaryMask& mask) {
  int x0 = mask.width(), y0 = mask.height(), x1 = -1, y1 = -1;
  for (int y = 0; y < mask.height(); ++y)
    for (int x = 0; x < mask.width(); ++x)
      if (mask.at(x, y)) {
        x0 = std::min(x0, x);
        y0 = std::min(y0, y);
        x1 = std::max(x1, x);
        y1 = std::max(y1, y);
      }
  if (x1 < 0) throw ValidationError("mask_bbox: empty mask");
  return {double(x0), double(y0), double(x1 + 1), double(y1 + 1)};
}

/// Mean of set-bit pixel indices.
inline Point2 mask_centroid(const BinaryMask& mask) {
  double sx = 0, sy = 0;
  std::size_t n = 0;
  for (int y = 0; y < mask.height(); ++y)
    for (int x = 0; x < mask.width(); ++x)
      if (mask.at(x, y)) {
        sx += x;
        sy += y;
        ++n;
      }
  if (n == 0) throw ValidationError("mask_centroid: empty mask");
  return {sx / double(n), sy / double(n)};
}

/// Per-image category -> count tally. Zero counts are never stored, so two
/// lists compare equal exactly when every category count agrees.
class ShoppingList {
public:
  ShoppingList() = default;
  ShoppingList(std::initializer_list<std::pair<const CategoryId, int>> init) {
    for (auto [c, n] : init) add(c, n);
  }

  void add(CategoryId c, int n = 1) {
    if (n < 0) throw ValidationError("shopping list counts must be non-negative");
    if (n == 0) return;
    counts_[c] += n;
  }

  [[nodiscard]] int count(CategoryId c) const {
    auto it = counts_.find(c);
    return it == counts_.end() ? 0 : it->second;
  }

  [[nodiscard]] int total() const {
    int t = 0;
    for (const auto& [c, n] : counts_) t += n;
    return t;
  }

  [[nodiscard]] bool empty() const { return counts_.empty(); }
  [[nodiscard]] const std::map<CategoryId, int>& counts() const { return counts_; }

  friend bool operator==(const ShoppingList&, const ShoppingList&) = default;

private:
  std::map<CategoryId, int> counts_;
};

/// splitmix64 finalizer; derives independent stream seeds from (seed, key).
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t key = 0) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (key + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace priming

template <>
struct std::hash<priming::CategoryId> {
  std::size_t operator()(priming::CategoryId c) const noexcept { return std::hash<int>{}(c.value); }
};
