#include <gtest/gtest.h>

#include <set>

#include "sensa/sobol.hpp"

using sensa::SobolStream;

TEST(Sobol, FirstPointsOneDimension) {
  SobolStream s(1);
  const auto p = s.next(3);
  ASSERT_EQ(p.size(), 3u);
  EXPECT_EQ(p[0][0], 0.5);
  EXPECT_EQ(p[1][0], 0.75);
  EXPECT_EQ(p[2][0], 0.25);
  EXPECT_EQ(s.index(), 3u);
}

TEST(Sobol, EmptyRequest) {
  SobolStream s(6);
  EXPECT_TRUE(s.next(0).empty());
  EXPECT_EQ(s.index(), 0u);
}

TEST(Sobol, FirstPointIsCentre) {
  SobolStream s(2);
  const auto p = s.next(1);
  EXPECT_EQ(p[0], (sensa::Point{0.5, 0.5}));
  SobolStream wide(200);
  const auto centre = wide.next(1);
  for (double v : centre[0]) EXPECT_EQ(v, 0.5);
}

// Coordinates frozen from a reference Joe-Kuo (new-joe-kuo-6.21201)
// implementation, unscrambled, in units of 2^-30. Point p is the p-th point
// after the all-zero origin.
TEST(Sobol, MatchesReferenceDirectionNumbers) {
  struct Case {
    std::size_t point;
    std::size_t dim;
    std::uint64_t scaled;
  };
  const Case cases[] = {
      {8, 0, 201326592},   {8, 1, 335544320},    {8, 2, 1006632960},  {8, 99, 1006632960},
      {8, 167, 872415232}, {8, 199, 67108864},   {1024, 0, 1572864},  {1024, 1, 404226048},
      {1024, 50, 542638080}, {1024, 199, 232259584}, {777, 3, 294649856}, {777, 120, 672137216},
      {777, 199, 154140672},
  };
  for (const auto& c : cases) {
    SobolStream s(200);
    s.skip(c.point - 1);
    const auto p = s.next(1)[0];
    EXPECT_EQ(p[c.dim], static_cast<double>(c.scaled) * 0x1p-30) << "point " << c.point << " dim " << c.dim;
  }
}

TEST(Sobol, SkipMatchesDiscard) {
  SobolStream skipped(1);
  skipped.skip(2);
  EXPECT_EQ(skipped.next(1)[0][0], 0.25);

  SobolStream unchanged(3);
  unchanged.skip(0);
  EXPECT_EQ(unchanged.index(), 0u);
  EXPECT_EQ(unchanged.next(1)[0], (sensa::Point{0.5, 0.5, 0.5}));
}

TEST(Sobol, FarSkipStaysInUnitCube) {
  SobolStream s(168);
  s.skip(1u << 20);
  const auto p = s.next(1)[0];
  for (double v : p) {
    EXPECT_GE(v, 0.0);
    EXPECT_LT(v, 1.0);
  }
}

TEST(Sobol, SplittingIsAssociative) {
  for (std::size_t k : {0u, 1u, 7u, 31u, 64u}) {
    for (std::size_t j : {1u, 5u, 33u}) {
      SobolStream whole(10);
      SobolStream parts(10);
      const auto all = whole.next(k + j);
      auto first = parts.next(k);
      const auto second = parts.next(j);
      first.insert(first.end(), second.begin(), second.end());
      EXPECT_EQ(first, all);

      SobolStream skipped(10);
      skipped.skip(k);
      EXPECT_EQ(skipped.next(j), std::vector<sensa::Point>(all.begin() + static_cast<long>(k), all.end()));
    }
  }
}

TEST(Sobol, DeterministicAcrossInstances) {
  SobolStream a(12), b(12);
  a.skip(100);
  b.skip(100);
  EXPECT_EQ(a.next(50), b.next(50));
}

TEST(Sobol, ElementaryIntervalsAtPowerOfTwo) {
  // The first 1024 points of the full net (including the origin) put exactly
  // 16 points in each of the 64 dyadic squares of side 1/8.
  SobolStream s(2);
  auto points = s.next(1023);
  points.push_back({0.0, 0.0});
  int counts[8][8] = {};
  for (const auto& p : points) ++counts[static_cast<int>(p[0] * 8)][static_cast<int>(p[1] * 8)];
  for (auto& row : counts) {
    for (int c : row) EXPECT_EQ(c, 16);
  }
  // Every 1 x 1/64 and 1/64 x 1 strip as well.
  for (int axis = 0; axis < 2; ++axis) {
    int strip[64] = {};
    for (const auto& p : points) ++strip[static_cast<int>(p[axis] * 64)];
    for (int c : strip) EXPECT_EQ(c, 16);
  }
}

TEST(Sobol, RejectsUnsupportedDimension) {
  EXPECT_THROW(SobolStream(0), sensa::Error);
  EXPECT_THROW(SobolStream(SobolStream::max_dimension() + 1), sensa::Error);
  EXPECT_NO_THROW(SobolStream(200));
  try {
    SobolStream(SobolStream::max_dimension() + 1);
  } catch (const sensa::Error& e) {
    EXPECT_EQ(e.kind(), sensa::ErrorKind::unsupported_dimension);
  }
}
