#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "priming/density_map.hpp"

using namespace priming;

namespace {

std::vector<Point2> random_centres(std::mt19937_64& rng, Extent img, int n) {
  std::uniform_real_distribution<double> ux(0, img.width), uy(0, img.height);
  std::vector<Point2> out;
  for (int i = 0; i < n; ++i) out.push_back({std::min(ux(rng), img.width - 1e-9), std::min(uy(rng), img.height - 1e-9)});
  return out;
}

}  // namespace

TEST(GenerateDensity, Dimensions) {
  const auto m = generate_density({}, {100, 61});
  EXPECT_EQ(m.width, 13);
  EXPECT_EQ(m.height, 8);
  EXPECT_EQ(m.stride, 8);
}

TEST(GenerateDensity, ZeroCentres) {
  const auto m = generate_density({}, {64, 64});
  EXPECT_EQ(count_from_density(m), 0.0);
  for (double v : m.values) EXPECT_EQ(v, 0.0);
}

TEST(GenerateDensity, OneCentreAnywhereHasUnitMass) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 200; ++i) {
    const auto c = random_centres(rng, {97, 53}, 1);
    EXPECT_NEAR(count_from_density(generate_density(c, {97, 53})), 1.0, 1e-9);
  }
  for (Point2 corner : {Point2{0, 0}, Point2{96.9, 0}, Point2{0, 52.9}, Point2{96.9, 52.9}})
    EXPECT_NEAR(count_from_density(generate_density(std::vector{corner}, {97, 53})), 1.0, 1e-9);
}

TEST(GenerateDensity, SevenCentresAndIsolatedPeak) {
  std::mt19937_64 rng(2);
  const auto c = random_centres(rng, {256, 256}, 7);
  EXPECT_NEAR(count_from_density(generate_density(c, {256, 256})), 7.0, 1e-6);

  // Isolated bumps (>= 4 sigma apart in cells) peak in their own cell.
  const std::vector<Point2> iso{{20, 20}, {200, 30}, {100, 180}};
  const auto m = generate_density(iso, {256, 256});
  for (const auto& p : iso) {
    const int cx = int(p.x / 8), cy = int(p.y / 8);
    double best = -1;
    int bx = -1, by = -1;
    for (int y = std::max(0, cy - 6); y <= std::min(m.height - 1, cy + 6); ++y)
      for (int x = std::max(0, cx - 6); x <= std::min(m.width - 1, cx + 6); ++x)
        if (m.at(x, y) > best) {
          best = m.at(x, y);
          bx = x;
          by = y;
        }
    EXPECT_EQ(bx, cx);
    EXPECT_EQ(by, cy);
  }
}

TEST(GenerateDensity, MassConservationIncludingBorders) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> n(1, 50);
  for (int i = 0; i < 200; ++i) {
    const Extent img{64 + 7 * (i % 9), 48 + 5 * (i % 11)};
    auto c = random_centres(rng, img, n(rng));
    c.push_back({0, 0});
    c.push_back({img.width - 0.5, img.height - 0.5});
    KernelParams p;
    p.adaptive = i % 2 == 1;
    const auto m = generate_density(c, img, p);
    EXPECT_NEAR(oracle::sum(m), double(c.size()), 1e-6);
    for (double v : m.values) EXPECT_GE(v, 0.0);
  }
}

TEST(GenerateDensity, TranslationEquivariance) {
  const std::vector<Point2> a{{60, 70}, {100, 90}};
  std::vector<Point2> b;
  for (auto p : a) b.push_back({p.x + 8, p.y + 8});
  const auto ma = generate_density(a, {256, 256});
  const auto mb = generate_density(b, {256, 256});
  for (int y = 0; y < ma.height - 1; ++y)
    for (int x = 0; x < ma.width - 1; ++x) EXPECT_NEAR(ma.at(x, y), mb.at(x + 1, y + 1), 1e-12);
}

TEST(GenerateDensity, SigmaControlsSpread) {
  const std::vector<Point2> c{{128, 128}};
  KernelParams narrow, wide;
  narrow.sigma = 1.0;
  wide.sigma = 2.5;
  EXPECT_GT(generate_density(c, {256, 256}, narrow).at(16, 16), generate_density(c, {256, 256}, wide).at(16, 16));
}

TEST(GenerateDensity, AdaptiveSigmaIsClamped) {
  KernelParams p;
  p.adaptive = true;
  // Far-apart pair: sigma = 0.3 * 200 / 8 = 7.5 > sigma_max, so both equal the clamped bump.
  const std::vector<Point2> far{{20, 20}, {220, 20}};
  KernelParams fixed;
  fixed.sigma = p.sigma_max;
  fixed.truncation_radius = 12;
  const auto ma = generate_density(far, {256, 64}, p);
  const auto mf = generate_density(far, {256, 64}, fixed);
  for (std::size_t i = 0; i < ma.values.size(); ++i) EXPECT_NEAR(ma.values[i], mf.values[i], 1e-12);
}

TEST(GenerateDensity, Errors) {
  EXPECT_THROW(generate_density(std::vector<Point2>{{64, 3}}, {64, 64}), ValidationError);
  EXPECT_THROW(generate_density(std::vector<Point2>{{-0.1, 3}}, {64, 64}), ValidationError);
  KernelParams bad;
  bad.sigma = 0;
  EXPECT_THROW(generate_density({}, {8, 8}, bad), ValidationError);
  bad = {};
  bad.truncation_radius = 5;  // < 3 sigma
  EXPECT_THROW(generate_density({}, {8, 8}, bad), ValidationError);
}

TEST(CountFromDensity, Linearity) {
  std::mt19937_64 rng(4);
  auto m = generate_density(random_centres(rng, {128, 128}, 9), {128, 128});
  EXPECT_NEAR(count_from_density(m), 9.0, 1e-6);
  for (double& v : m.values) v *= 2;
  EXPECT_NEAR(count_from_density(m), 18.0, 1e-6);
  EXPECT_EQ(count_from_density(DensityMap(4, 4)), 0.0);
}

TEST(CountFromDensity, RoundTripsIntegers) {
  std::mt19937_64 rng(5);
  for (int n = 0; n <= 40; ++n)
    EXPECT_EQ(round_count(count_from_density(generate_density(random_centres(rng, {200, 150}, n), {200, 150}))), n);
}

TEST(RoundCount, HalfUp) {
  EXPECT_EQ(round_count(4.49), 4);
  EXPECT_EQ(round_count(4.5), 5);
  EXPECT_EQ(round_count(0.0), 0);
  EXPECT_THROW(round_count(-0.1), ValidationError);
  EXPECT_THROW(round_count(std::nan("")), ValidationError);
}

TEST(Dmap, BitExactLayout) {
  DensityMap m(2, 1);
  m.values = {1.0, 0.5};
  const auto b = encode_dmap(m);
  const std::vector<std::uint8_t> expect{'D', 'M', 'A', 'P', 1, 0, 0, 0, 2, 0, 0, 0, 1, 0, 0, 0,
                                         0x00, 0x00, 0x80, 0x3f, 0x00, 0x00, 0x00, 0x3f};
  EXPECT_EQ(b, expect);
  EXPECT_EQ(decode_dmap(b), m);
}

TEST(Dmap, CorruptInputs) {
  DensityMap m(3, 2, 0.25);
  auto good = encode_dmap(m);
  auto bad = good;
  bad[0] = 'X';
  EXPECT_THROW(decode_dmap(bad), ValidationError);
  bad = good;
  bad[4] = 2;
  EXPECT_THROW(decode_dmap(bad), ValidationError);
  bad = good;
  bad.pop_back();
  EXPECT_THROW(decode_dmap(bad), ValidationError);
  bad = good;
  bad[8] = 0;
  EXPECT_THROW(decode_dmap(bad), ValidationError);
  bad = good;
  bad[19] = 0x7f;
  bad[18] = 0xc0;  // NaN
  EXPECT_THROW(decode_dmap(bad), ValidationError);
  EXPECT_THROW(decode_dmap(std::vector<std::uint8_t>{'D', 'M'}), ValidationError);
}
