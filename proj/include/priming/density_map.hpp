#pragma once

/// @file density_map.hpp
/// Ground-truth density maps at 1/8 input resolution. Each instance centre
/// contributes a truncated Gaussian bump renormalised to unit mass, so the
/// map integrates to the instance count exactly (up to rounding).
///
/// DMAP file layout (little-endian): "DMAP", u32 version = 1, u32 width,
/// u32 height, then width*height float32 values in row-major order.

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "priming/core.hpp"

namespace priming {

inline constexpr int kDensityStride = 8;

struct DensityMap {
  int width = 0, height = 0;
  int stride = kDensityStride;
  std::vector<double> values;

  DensityMap() = default;
  DensityMap(int w, int h, double fill = 0.0) : width(w), height(h), values(static_cast<std::size_t>(w) * h, fill) {
    if (w <= 0 || h <= 0) throw ValidationError("density map dimensions must be positive");
  }

  /// Map sized for an image: ceil(dim / 8) cells on each axis.
  static DensityMap for_image(Extent image) {
    return DensityMap((image.width + kDensityStride - 1) / kDensityStride,
                      (image.height + kDensityStride - 1) / kDensityStride);
  }

  [[nodiscard]] double at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
  [[nodiscard]] double& at(int x, int y) { return values[static_cast<std::size_t>(y) * width + x]; }

  friend bool operator==(const DensityMap&, const DensityMap&) = default;
};

struct KernelParams {
  double sigma = 2.0;              // cells
  double truncation_radius = 8.0;  // cells
  bool adaptive = false;
  double beta = 0.3;
  int neighbours = 3;
  double sigma_min = 0.5;
  double sigma_max = 4.0;

  void validate() const {
    if (!(sigma > 0.0)) throw ValidationError("kernel sigma must be positive");
    if (!(truncation_radius >= 3.0 * sigma)) throw ValidationError("truncation radius must be at least 3 sigma");
    if (adaptive && !(beta > 0.0 && neighbours >= 1 && sigma_min > 0.0 && sigma_min <= sigma_max))
      throw ValidationError("invalid adaptive kernel parameters");
  }
};

namespace detail {

// Unit-mass Gaussian centred at (mu_x, mu_y) in cell coordinates, where cell
// (i, j) has its centre at (i + 0.5, j + 0.5); truncated to a disk of radius
// `radius` and clipped to the map, then renormalised over what remains.
inline void add_bump(DensityMap& map, double mu_x, double mu_y, double sigma, double radius) {
  const int x0 = std::max(0, static_cast<int>(std::floor(mu_x - radius)));
  const int x1 = std::min(map.width - 1, static_cast<int>(std::ceil(mu_x + radius)));
  const int y0 = std::max(0, static_cast<int>(std::floor(mu_y - radius)));
  const int y1 = std::min(map.height - 1, static_cast<int>(std::ceil(mu_y + radius)));
  const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
  const double r2 = radius * radius;

  std::vector<double> w;
  w.reserve(static_cast<std::size_t>(x1 - x0 + 1) * (y1 - y0 + 1));
  double total = 0.0;
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      const double dx = x + 0.5 - mu_x, dy = y + 0.5 - mu_y;
      const double d2 = dx * dx + dy * dy;
      const double v = d2 <= r2 ? std::exp(-d2 * inv2s2) : 0.0;
      w.push_back(v);
      total += v;
    }
  if (total <= 0.0) {
    // Degenerate window: all mass on the containing cell.
    const int cx = std::clamp(static_cast<int>(std::floor(mu_x)), 0, map.width - 1);
    const int cy = std::clamp(static_cast<int>(std::floor(mu_y)), 0, map.height - 1);
    map.at(cx, cy) += 1.0;
    return;
  }
  std::size_t k = 0;
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) map.at(x, y) += w[k++] / total;
}

}  // namespace detail

/// Builds the ground-truth map for instance centres given in pixel-index
/// coordinates of an image of size `image`.
inline DensityMap generate_density(std::span<const Point2> centers, Extent image, const KernelParams& params = {}) {
  params.validate();
  if (image.width <= 0 || image.height <= 0) throw ValidationError("image dimensions must be positive");
  for (const auto& c : centers)
    if (!(c.x >= 0.0 && c.y >= 0.0 && c.x < image.width && c.y < image.height))
      throw ValidationError("density centre (" + std::to_string(c.x) + ", " + std::to_string(c.y) +
                            ") lies outside the image");

  DensityMap map = DensityMap::for_image(image);
  std::vector<double> dist;
  for (std::size_t i = 0; i < centers.size(); ++i) {
    double sigma = params.sigma;
    if (params.adaptive && centers.size() > 1) {
      dist.clear();
      for (std::size_t j = 0; j < centers.size(); ++j)
        if (j != i) dist.push_back(std::hypot(centers[i].x - centers[j].x, centers[i].y - centers[j].y));
      const std::size_t m = std::min<std::size_t>(static_cast<std::size_t>(params.neighbours), dist.size());
      std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(m), dist.end());
      double mean = 0.0;
      for (std::size_t j = 0; j < m; ++j) mean += dist[j];
      mean /= double(m);
      sigma = std::clamp(params.beta * mean / kDensityStride, params.sigma_min, params.sigma_max);
    }
    const double radius = std::max(params.truncation_radius, 3.0 * sigma);
    // Pixel x spans [x, x+1); its centre x+0.5 maps to cell coordinate (x+0.5)/8.
    detail::add_bump(map, (centers[i].x + 0.5) / kDensityStride, (centers[i].y + 0.5) / kDensityStride, sigma,
                     radius);
  }
  return map;
}

inline double count_from_density(const DensityMap& map) {
  double s = 0.0;
  for (double v : map.values) s += v;
  return s;
}

/// Round half up.
inline long round_count(double count) {
  if (!(count >= 0.0)) throw ValidationError("round_count: negative or NaN count");
  return static_cast<long>(std::floor(count + 0.5));
}

// --- DMAP serialisation ---------------------------------------------------

namespace detail {

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline std::uint32_t get_u32(std::span<const std::uint8_t> in, std::size_t off) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t(in[off + static_cast<std::size_t>(i)]) << (8 * i);
  return v;
}

}  // namespace detail

/// Values are narrowed to float32.
inline std::vector<std::uint8_t> encode_dmap(const DensityMap& map) {
  std::vector<std::uint8_t> out{'D', 'M', 'A', 'P'};
  out.reserve(16 + map.values.size() * 4);
  detail::put_u32(out, 1);
  detail::put_u32(out, static_cast<std::uint32_t>(map.width));
  detail::put_u32(out, static_cast<std::uint32_t>(map.height));
  for (double v : map.values) detail::put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  return out;
}

inline DensityMap decode_dmap(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), "DMAP", 4) != 0)
    throw ValidationError("DMAP: bad magic or truncated header");
  if (const auto version = detail::get_u32(bytes, 4); version != 1)
    throw ValidationError("DMAP: unsupported version " + std::to_string(version));
  const auto w = detail::get_u32(bytes, 8), h = detail::get_u32(bytes, 12);
  if (w == 0 || h == 0 || w > (1u << 16) || h > (1u << 16)) throw ValidationError("DMAP: invalid dimensions");
  const std::size_t n = std::size_t(w) * h;
  if (bytes.size() != 16 + 4 * n)
    throw ValidationError("DMAP: expected " + std::to_string(16 + 4 * n) + " bytes, got " + std::to_string(bytes.size()));
  DensityMap map(static_cast<int>(w), static_cast<int>(h));
  for (std::size_t i = 0; i < n; ++i) {
    const float v = std::bit_cast<float>(detail::get_u32(bytes, 16 + 4 * i));
    if (!std::isfinite(v)) throw ValidationError("DMAP: non-finite value at cell " + std::to_string(i));
    map.values[i] = v;
  }
  return map;
}

inline void write_dmap(const std::string& path, const DensityMap& map) {
  const auto bytes = encode_dmap(map);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw std::runtime_error("failed writing " + path);
}

inline DensityMap read_dmap(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ValidationError("cannot open density map " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  try {
    return decode_dmap(bytes);
  } catch (const ValidationError& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

}  // namespace priming
