#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "sensa/models.hpp"

using namespace sensa;

namespace {

const SyntheticModelParams kParams = SyntheticModelParams::reference();

}  // namespace

TEST(SyntheticZ, HandSubstitution) {
  const std::vector<double> x{0.1, 0.2, 0.3};
  const auto z = synthetic_z(x, kParams);
  const double expected = 0.6661 * (0.3 - 0.1030) * (0.3 - 0.1030);
  for (double v : z) EXPECT_NEAR(v, expected, 1e-15);
  EXPECT_NEAR(expected, 0.02585, 5e-6);
}

TEST(SyntheticZ, BelowAllLocationsIsZero) {
  const std::vector<double> x{0.5, 0.9, 0.1};
  for (double v : synthetic_z(x, kParams)) EXPECT_EQ(v, 0.0);
}

TEST(SyntheticZ, AllActive) {
  const std::vector<double> x{1.0, 1.0, 1.0};
  const auto z = synthetic_z(x, kParams);
  const double t1 = 0.8788;
  const double t2 = 0.2668 * (1.0 - 0.9485);
  const double t3 = 0.6661 * (1.0 - 0.1030) * (1.0 - 0.1030);
  EXPECT_NEAR(z[0], t2 + t3, 1e-15);
  EXPECT_NEAR(z[1], t1 + t2 + t3, 1e-15);
  EXPECT_NEAR(z[2], t1 + t3, 1e-15);
}

TEST(SyntheticZ, StepAtFirstLocation) {
  const double h = 1e-7;
  std::vector<double> lo{0.5933 - h, 0.5, 0.05};
  std::vector<double> hi{0.5933 + h, 0.5, 0.05};
  const auto zl = synthetic_z(lo, kParams);
  const auto zh = synthetic_z(hi, kParams);
  EXPECT_EQ(zh[0] - zl[0], 0.0);
  EXPECT_NEAR(zh[1] - zl[1], 0.8788, 1e-12);
  EXPECT_NEAR(zh[2] - zl[2], 0.8788, 1e-12);
}

TEST(SyntheticZ, SlopeBreakAtSecondLocation) {
  const double h = 1e-5;
  auto z_at = [](double x2) { return synthetic_z(std::vector<double>{0.2, x2, 0.05}, kParams); };
  const double xi = 0.9485;
  for (std::size_t j : {0u, 1u}) {
    EXPECT_NEAR(z_at(xi + h)[j] - z_at(xi - h)[j], 0.2668 * h, 1e-12);
    const double left = (z_at(xi - h)[j] - z_at(xi - 2 * h)[j]) / h;
    const double right = (z_at(xi + 2 * h)[j] - z_at(xi + h)[j]) / h;
    EXPECT_NEAR(left, 0.0, 1e-9);
    EXPECT_NEAR(right, 0.2668, 1e-6);
  }
  EXPECT_EQ(z_at(xi + h)[2], 0.0);
}

TEST(SyntheticZ, SmoothAtThirdLocation) {
  const double h = 1e-4;
  auto z_at = [](double x3) { return synthetic_z(std::vector<double>{0.2, 0.2, x3}, kParams)[0]; };
  const double xi = 0.1030;
  EXPECT_NEAR(z_at(xi + h) - z_at(xi - h), 0.0, 1e-7);
  const double left = (z_at(xi) - z_at(xi - h)) / h;
  const double right = (z_at(xi + h) - z_at(xi)) / h;
  EXPECT_NEAR(right - left, 0.0, 2e-4);
  const double second_left = (z_at(xi - h) - 2 * z_at(xi - 2 * h) + z_at(xi - 3 * h)) / (h * h);
  const double second_right = (z_at(xi + 3 * h) - 2 * z_at(xi + 2 * h) + z_at(xi + h)) / (h * h);
  EXPECT_NEAR(second_left, 0.0, 1e-6);
  EXPECT_NEAR(second_right, 2 * 0.6661, 1e-4);
}

TEST(SyntheticEval, InitialState) {
  const std::vector<double> x{0.1, 0.2, 0.3};
  const double times[] = {0.0};
  const auto y = synthetic_eval(x, times, kParams);
  ASSERT_EQ(y.size(), 1u);
  EXPECT_EQ(y[0], kParams.initial);
  EXPECT_NEAR(y[0][0], -0.1900320, 1e-4);
  EXPECT_NEAR(y[0][1], 0.5144967, 1e-4);
  EXPECT_NEAR(y[0][2], 0.4093612, 1e-4);
}

TEST(SyntheticEval, ReferenceTrajectory) {
  const std::vector<double> x{0.1, 0.2, 0.3};
  const double times[] = {0.0, 5.0, 10.0};
  const auto y = synthetic_eval(x, times, kParams);
  ASSERT_EQ(y.size(), 3u);
  const double at5[] = {-0.1478757, 0.5489932, 0.3864914};
  const double at10[] = {-0.1024813, 0.5854096, 0.3659173};
  for (int j = 0; j < 3; ++j) {
    EXPECT_NEAR(y[1][j], at5[j], 5e-3);
    EXPECT_NEAR(y[2][j], at10[j], 5e-3);
  }
  EXPECT_EQ(y[2], synthetic_final(x, kParams));
}

TEST(SyntheticEval, StepHalvingConverges) {
  const std::vector<std::vector<double>> xs{{0.1, 0.2, 0.3}, {0.9, 0.99, 0.95}, {0.6, 0.5, 0.7}, {1.0, 1.0, 1.0}};
  for (const auto& x : xs) {
    const auto coarse = synthetic_final(x, kParams, 0.01);
    const auto fine = synthetic_final(x, kParams, 0.005);
    for (std::size_t j = 0; j < 3; ++j) EXPECT_LT(std::abs(coarse[j] - fine[j]), 1e-8);
  }
}

TEST(SyntheticEval, ConstantBelowAllLocations) {
  const std::vector<double> x{0.2, 0.3, 0.05};
  EXPECT_EQ(synthetic_final(x, kParams), kParams.initial);
}

TEST(SyntheticEval, Errors) {
  const std::vector<double> bad{0.1, 0.2};
  EXPECT_THROW(synthetic_final(bad, kParams), Error);
  const std::vector<double> x{0.1, 0.2, 0.3};
  const double backwards[] = {5.0, 1.0};
  EXPECT_THROW(synthetic_eval(x, backwards, kParams), Error);

  auto wild = kParams;
  wild.kappa(0, 0) = 1e6;
  wild.scales = {1e3, 1e3, 1e3};
  const std::vector<double> top{1.0, 1.0, 1.0};
  try {
    synthetic_final(top, wild);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::divergence);
  }
}

TEST(SyntheticModelParams, ValidateCatchesShapeErrors) {
  EXPECT_NO_THROW(kParams.validate());
  auto p = kParams;
  p.degrees.pop_back();
  EXPECT_THROW(p.validate(), Error);
  p = kParams;
  p.mixing[0].push_back(7);
  EXPECT_THROW(p.validate(), Error);
}

TEST(Ishigami, Values) {
  EXPECT_NEAR(ishigami(std::vector<double>{0.5, 0.5, 0.5})[0], 0.0, 1e-15);
  EXPECT_NEAR(ishigami(std::vector<double>{0.75, 0.5, 0.5})[0], 1.0, 1e-15);
  const double u3 = std::numbers::pi * 0.5;
  EXPECT_NEAR(ishigami(std::vector<double>{0.75, 0.75, 0.75})[0], 1.0 + 7.0 + 0.1 * std::pow(u3, 4), 1e-12);
  EXPECT_THROW(ishigami(std::vector<double>{0.5}), Error);
}
