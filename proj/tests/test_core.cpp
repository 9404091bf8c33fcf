#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "priming/core.hpp"

using namespace priming;

namespace {

BinaryMask rect_mask(int w, int h, int x0, int y0, int x1, int y1) {
  BinaryMask m(w, h);
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) m.set(x, y);
  return m;
}

BinaryMask random_mask(std::mt19937_64& rng, int w, int h, double p) {
  std::bernoulli_distribution bit(p);
  BinaryMask m(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (bit(rng)) m.set(x, y);
  return m;
}

}  // namespace

TEST(Iou, IdenticalBoxes) { EXPECT_DOUBLE_EQ(iou({0, 0, 1, 1}, {0, 0, 1, 1}), 1.0); }

TEST(Iou, DisjointBoxes) { EXPECT_DOUBLE_EQ(iou({0, 0, 1, 1}, {2, 2, 3, 3}), 0.0); }

TEST(Iou, PartialOverlap) { EXPECT_DOUBLE_EQ(iou({0, 0, 2, 2}, {1, 1, 3, 3}), 1.0 / 7.0); }

TEST(Iou, DegenerateBoxesGiveZero) {
  EXPECT_EQ(iou({1, 1, 1, 1}, {1, 1, 1, 1}), 0.0);
  EXPECT_EQ(iou({0, 0, 0, 5}, {0, 0, 2, 5}), 0.0);
}

TEST(Iou, SymmetricAndSelfOneOnRandomBoxes) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0, 50);
  for (int i = 0; i < 2000; ++i) {
    const double ax = u(rng), ay = u(rng), bx = u(rng), by = u(rng);
    const BBox a{ax, ay, ax + 1 + u(rng), ay + 1 + u(rng)};
    const BBox b{bx, by, bx + 1 + u(rng), by + 1 + u(rng)};
    EXPECT_EQ(iou(a, b), iou(b, a));
    EXPECT_DOUBLE_EQ(iou(a, a), 1.0);
    EXPECT_NEAR(iou(a, b), oracle::box_iou(a, b), 1e-12);
    EXPECT_GE(iou(a, b), 0.0);
    EXPECT_LE(iou(a, b), 1.0);
  }
}

TEST(NormalizeDegrees, WrapsIntoRange) {
  EXPECT_EQ(normalize_degrees(0), 0);
  EXPECT_EQ(normalize_degrees(360), 0);
  EXPECT_EQ(normalize_degrees(-90), 270);
  EXPECT_EQ(normalize_degrees(725), 5);
  EXPECT_EQ(normalize_degrees(-1e-18), 0);
}

TEST(BinaryMask, RejectsNonPositiveDimensions) {
  EXPECT_THROW(BinaryMask(0, 3), ValidationError);
  EXPECT_THROW(BinaryMask(3, -1), ValidationError);
}

TEST(TransformMask, IdentityIsBitIdentical) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 20; ++i) {
    const auto m = random_mask(rng, 17 + i, 9 + 2 * i, 0.4);
    EXPECT_EQ(transform_mask(m, {}, m.extent()), m);
  }
}

TEST(TransformMask, FullTurnEqualsNoTurn) {
  std::mt19937_64 rng(4);
  const auto m = random_mask(rng, 31, 24, 0.5);
  const Extent canvas{64, 64};
  EXPECT_EQ(transform_mask(m, {360, 0.8, 10, 7}, canvas), transform_mask(m, {0, 0.8, 10, 7}, canvas));
  EXPECT_EQ(transform_mask(m, {720, 1, 3, 3}, canvas), transform_mask(m, {0, 1, 3, 3}, canvas));
}

TEST(TransformMask, HalfScaleSquareArea) {
  const BinaryMask full(100, 100, true);
  const auto out = transform_mask(full, {0, 0.5, 0, 0}, {100, 100});
  EXPECT_NEAR(double(out.popcount()), 2500.0, 0.02 * 2500);
  // Scaling is about the source centre, so the result stays centred.
  const auto c = mask_centroid(out);
  EXPECT_NEAR(c.x, 49.5, 1.0);
  EXPECT_NEAR(c.y, 49.5, 1.0);
}

TEST(TransformMask, QuarterTurnPreservesArea) {
  const auto m = rect_mask(40, 20, 0, 0, 40, 20);
  const auto out = transform_mask(m, {90, 1, -10, 10}, {40, 40});
  EXPECT_EQ(out.popcount(), 800u);
  EXPECT_EQ(mask_bbox(out), (BBox{0, 0, 20, 40}));
}

TEST(TransformMask, ClipsOutsideCanvas) {
  const BinaryMask full(10, 10, true);
  const auto out = transform_mask(full, {0, 1, 5, 0}, {10, 10});
  EXPECT_EQ(out.popcount(), 50u);
}

TEST(TransformMask, RejectsBadScaleOrCanvas) {
  const BinaryMask m(4, 4, true);
  EXPECT_THROW(transform_mask(m, {0, 0, 0, 0}, {4, 4}), ValidationError);
  EXPECT_THROW(transform_mask(m, {0, -1, 0, 0}, {4, 4}), ValidationError);
  EXPECT_THROW(transform_mask(m, {}, {0, 4}), ValidationError);
}

TEST(ConnectedComponents, EmptyMask) { EXPECT_TRUE(connected_components(BinaryMask(8, 8)).empty()); }

TEST(ConnectedComponents, FullMask) {
  const auto cc = connected_components(BinaryMask(7, 5, true));
  ASSERT_EQ(cc.size(), 1u);
  EXPECT_EQ(cc[0].area, 35u);
}

TEST(ConnectedComponents, TwoBlocks) {
  auto m = rect_mask(12, 12, 0, 0, 3, 3);
  for (int y = 6; y < 9; ++y)
    for (int x = 6; x < 9; ++x) m.set(x, y);
  const auto cc = connected_components(m);
  ASSERT_EQ(cc.size(), 2u);
  EXPECT_EQ(cc[0].area, 9u);
  EXPECT_EQ(cc[1].area, 9u);
  EXPECT_EQ(oracle::component_areas(m, 8), (std::vector<std::size_t>{9, 9}));
}

TEST(ConnectedComponents, DiagonalTouchDependsOnConnectivity) {
  BinaryMask m(4, 4);
  m.set(0, 0);
  m.set(1, 1);
  EXPECT_EQ(connected_components(m, 8).size(), 1u);
  EXPECT_EQ(connected_components(m, 4).size(), 2u);
  EXPECT_THROW(connected_components(m, 6), ValidationError);
}

TEST(ConnectedComponents, MatchesFloodFillOracle) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 60; ++i) {
    const auto m = random_mask(rng, 23, 19, 0.3 + 0.005 * i);
    for (int conn : {4, 8}) {
      const auto cc = connected_components(m, conn);
      std::vector<std::size_t> areas;
      std::size_t total = 0;
      BinaryMask cover(m.width(), m.height());
      for (const auto& c : cc) {
        areas.push_back(c.area);
        total += c.area;
        EXPECT_EQ(c.mask.popcount(), c.area);
        EXPECT_EQ(connected_components(c.mask, conn).size(), 1u);
        for (std::size_t k = 0; k < c.mask.size(); ++k) {
          if (!c.mask[k]) continue;
          EXPECT_FALSE(cover[k]) << "components overlap";
          cover.data()[k] = 1;
        }
      }
      std::sort(areas.begin(), areas.end());
      EXPECT_EQ(areas, oracle::component_areas(m, conn));
      EXPECT_EQ(total, m.popcount());
      EXPECT_EQ(cover, m);
    }
  }
}

TEST(MaskBbox, FullMask) { EXPECT_EQ(mask_bbox(BinaryMask(6, 4, true)), (BBox{0, 0, 6, 4})); }

TEST(MaskBbox, SingleBit) {
  BinaryMask m(10, 10);
  m.set(3, 5);
  EXPECT_EQ(mask_bbox(m), (BBox{3, 5, 4, 6}));
}

TEST(MaskBbox, LShape) {
  auto m = rect_mask(8, 8, 0, 0, 2, 2);
  for (int x = 0; x < 5; ++x) m.set(x, 0);
  EXPECT_EQ(mask_bbox(m), (BBox{0, 0, 5, 2}));
  EXPECT_EQ(mask_bbox(m), oracle::bbox(m));
}

TEST(MaskBbox, EmptyMaskThrows) { EXPECT_THROW(mask_bbox(BinaryMask(3, 3)), ValidationError); }

TEST(MaskCentroid, SymmetricSquare) {
  const auto c = mask_centroid(rect_mask(10, 10, 2, 2, 8, 8));
  EXPECT_DOUBLE_EQ(c.x, 4.5);
  EXPECT_DOUBLE_EQ(c.y, 4.5);
}

TEST(MaskCentroid, SingleBit) {
  BinaryMask m(10, 10);
  m.set(7, 2);
  EXPECT_EQ(mask_centroid(m), (Point2{7, 2}));
}

TEST(MaskCentroid, Midpoint) {
  BinaryMask m(11, 1);
  m.set(0, 0);
  m.set(10, 0);
  EXPECT_EQ(mask_centroid(m), (Point2{5, 0}));
}

TEST(MaskCentroid, EmptyMaskThrows) { EXPECT_THROW(mask_centroid(BinaryMask(3, 3)), ValidationError); }

TEST(MaskCentroid, LiesInsideBbox) {
  std::mt19937_64 rng(6);
  for (int i = 0; i < 200; ++i) {
    auto m = random_mask(rng, 15, 15, 0.1);
    if (m.empty()) m.set(0, 0);
    const auto c = mask_centroid(m);
    const auto b = mask_bbox(m);
    EXPECT_GE(c.x, b.x_min);
    EXPECT_LT(c.x, b.x_max);
    EXPECT_GE(c.y, b.y_min);
    EXPECT_LT(c.y, b.y_max);
  }
}

TEST(ShoppingList, ZeroCountsAreNotStored) {
  ShoppingList a;
  a.add(CategoryId(3), 0);
  EXPECT_TRUE(a.empty());
  EXPECT_EQ(a, ShoppingList{});
  EXPECT_THROW(a.add(CategoryId(3), -1), ValidationError);
  const ShoppingList b{{CategoryId(1), 2}, {CategoryId(2), 1}};
  EXPECT_EQ(b.total(), 3);
  EXPECT_EQ(b.count(CategoryId(9)), 0);
}

TEST(MixSeed, DistinctKeysGiveDistinctSeeds) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t k = 0; k < 1000; ++k) seen.insert(mix_seed(42, k));
  EXPECT_EQ(seen.size(), 1000u);
  EXPECT_EQ(mix_seed(42, 7), mix_seed(42, 7));
}
