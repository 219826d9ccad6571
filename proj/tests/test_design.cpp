#include <gtest/gtest.h>

#include <random>

#include "sensa/design.hpp"

using namespace sensa;

TEST(Design, BuildRowsSplitsCoordinates) {
  const std::vector<Point> points{{1, 2, 3, 4, 5, 6}};
  const auto rows = build_design_rows(points, 3);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].a, (Point{1, 2, 3}));
  EXPECT_EQ(rows[0].b, (Point{4, 5, 6}));
  EXPECT_EQ(rows[0].row, 1u);

  EXPECT_TRUE(build_design_rows(std::vector<Point>{}, 3).empty());

  const std::vector<Point> two{{0.1, 0.9}, {0.2, 0.8}};
  const auto r1 = build_design_rows(two, 1, 5);
  EXPECT_EQ(r1[0].a, Point{0.1});
  EXPECT_EQ(r1[1].b, Point{0.8});
  EXPECT_EQ(r1[1].row, 6u);
}

TEST(Design, BuildRowsRejectsWrongDimension) {
  const std::vector<Point> points{{1, 2, 3}};
  try {
    build_design_rows(points, 2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::malformed_point);
  }
}

TEST(Design, HybridPoint) {
  const Point a{0.1, 0.2, 0.3}, b{0.9, 0.8, 0.7};
  EXPECT_EQ(hybrid_point(a, b, 1), (Point{0.1, 0.8, 0.3}));
  EXPECT_EQ(hybrid_point(a, a, 2), a);
  EXPECT_EQ(hybrid_point(Point{0.3}, Point{0.6}, 0), Point{0.6});
  EXPECT_THROW(hybrid_point(a, b, 3), Error);
}

TEST(Design, HybridIsAnInvolutionOnItsColumn) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u;
  for (int trial = 0; trial < 100; ++trial) {
    Point a(5), b(5);
    for (auto& v : a) v = u(rng);
    for (auto& v : b) v = u(rng);
    const auto i = static_cast<std::size_t>(trial % 5);
    EXPECT_EQ(hybrid_point(hybrid_point(a, b, i), a, i), a);
  }
}

TEST(Design, PlanCardinalityAndOrder) {
  std::vector<Point> points(1, Point(6, 0.5));
  auto rows = build_design_rows(points, 3);
  const auto plan = evaluation_plan(rows);
  ASSERT_EQ(plan.size(), 5u);
  EXPECT_EQ(plan[0].tag, MatrixTag::A());
  EXPECT_EQ(plan[1].tag, MatrixTag::B());
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(plan[2 + i].tag, MatrixTag::AB(i));

  EXPECT_TRUE(evaluation_plan(std::vector<DesignRow>{}).empty());

  std::vector<Point> big(10, Point(168, 0.25));
  EXPECT_EQ(evaluation_plan(build_design_rows(big, 84)).size(), 860u);
}

TEST(Design, PlanHybridRequestsSwapOneColumn) {
  const std::vector<Point> points{{0.1, 0.2, 0.3, 0.7, 0.8, 0.9}};
  const auto plan = evaluation_plan(build_design_rows(points, 3));
  EXPECT_EQ(plan[3].x, (Point{0.1, 0.8, 0.3}));
  EXPECT_EQ(plan[3].tag.str(), "AB:2");
}

TEST(Design, TagRoundTrip) {
  for (const auto& tag : {MatrixTag::A(), MatrixTag::B(), MatrixTag::AB(0), MatrixTag::AB(83)}) {
    EXPECT_EQ(MatrixTag::parse(tag.str()), tag);
  }
  EXPECT_FALSE(MatrixTag::parse("AB:0"));
  EXPECT_FALSE(MatrixTag::parse("C"));
  EXPECT_FALSE(MatrixTag::parse("AB:x"));
}

TEST(Design, IdentityCurvesLeavePointsUnchanged) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u;
  std::vector<Point> points(50, Point(6));
  for (auto& p : points) {
    for (auto& v : p) v = u(rng);
  }
  const std::vector<CumulativeCurve> curves(3, CumulativeCurve::identity());
  EXPECT_EQ(transform_points(points, curves), points);
}

TEST(Design, TransformUsesInverseCdfPerColumn) {
  // CDF of the uniform density on [0.5, 1].
  const CumulativeCurve half{{0.0, 0.5, 1.0}, {0.0, 0.0, 1.0}};
  const std::vector<CumulativeCurve> one{half};
  const std::vector<Point> points{{0.5, 0.5}};
  EXPECT_EQ(transform_points(points, one)[0], (Point{0.75, 0.75}));

  // m = 2: coordinate 3 (index 2) uses curve 1.
  const std::vector<CumulativeCurve> two{half, CumulativeCurve::identity()};
  const std::vector<Point> four{{0.5, 0.5, 0.5, 0.5}};
  EXPECT_EQ(transform_points(four, two)[0], (Point{0.75, 0.5, 0.75, 0.5}));
}

TEST(Design, InputRangeMapping) {
  const InputRange r{-2.0, 6.0};
  EXPECT_DOUBLE_EQ(r.to_physical(0.25), 0.0);
  EXPECT_DOUBLE_EQ(r.to_unit(6.0), 1.0);
  const InputRange unit;
  EXPECT_EQ(unit.to_physical(0.3), 0.3);
  EXPECT_EQ(unit.to_unit(0.3), 0.3);
}
