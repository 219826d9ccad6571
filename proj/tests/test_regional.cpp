#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "oracles.hpp"
#include "sensa/models.hpp"
#include "sensa/regional.hpp"

using namespace sensa;
using sensa::testing::random_blocks;
using sensa::testing::single_block;
using sensa::testing::sobol_blocks;

namespace {

std::vector<double> wavy(std::span<const double> x) {
  return {std::sin(5 * x[0]) + x[1] * x[2], x[0] < 0.4 ? 0.0 : 1.0 + x[1], x[2] * x[2]};
}

}  // namespace

TEST(Boxcars, SingleObservationHeight) {
  const std::vector<EvaluationBlock> blocks{single_block(0.2, 0.6, 2.0, 0.0)};
  const auto t = boxcar_contributions(blocks, 0, 0, {2.0, 1e-12});
  EXPECT_NEAR(t.value_at(0.4), 10.0, 1e-9);
  EXPECT_EQ(t.value_at(0.1), 0.0);
  EXPECT_EQ(t.value_at(0.7), 0.0);
  ASSERT_EQ(t.breakpoints.size(), 2u);
  EXPECT_NEAR(t.breakpoints.front(), 0.2, 1e-12);
  EXPECT_NEAR(t.breakpoints.back(), 0.6, 1e-12);
}

TEST(Boxcars, AlphaZeroIntegratesToSampleCount) {
  const auto blocks = random_blocks(3, 37, wavy, 1);
  const auto t = boxcar_contributions(blocks, 1, 0, {0.0, 1e-4});
  EXPECT_NEAR(t.integral(), 37.0, 37.0 * 1e-12);
}

TEST(Boxcars, ZeroDifferenceHasZeroHeight) {
  const std::vector<EvaluationBlock> blocks{single_block(0.2, 0.6, 1.5, 1.5)};
  const auto t = boxcar_contributions(blocks, 0, 0, {2.0, 1e-4});
  for (double v : t.values) EXPECT_EQ(v, 0.0);
}

TEST(Boxcars, NegativeAlphaDropsZeroDifferences) {
  std::vector<EvaluationBlock> blocks{single_block(0.2, 0.6, 1.5, 1.5), single_block(0.1, 0.3, 1.0, 3.0)};
  blocks[1].row = 2;
  std::size_t dropped = 0;
  const auto t = boxcar_contributions(blocks, 0, 0, {-1.0, 1e-4}, &dropped);
  EXPECT_EQ(dropped, 1u);
  for (double v : t.values) EXPECT_TRUE(std::isfinite(v));
  EXPECT_NEAR(t.integral(), 0.5, 1e-12);
}

TEST(Boxcars, IntegralEqualsSumOfNumerators) {
  for (double alpha : {-1.5, 0.0, 1.0, 2.0, 3.5}) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto blocks = random_blocks(3, 120, wavy, seed);
      for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j < 3; ++j) {
          long double expected = 0.0L;
          for (const auto& b : blocks) {
            const double dy = std::abs(b.ya[j] - b.yab(i, j));
            if (alpha < 0 && dy == 0) continue;
            expected += alpha == 0 ? 1.0 : std::pow(dy, alpha);
          }
          const auto t = boxcar_contributions(blocks, i, j, {alpha, 1e-4});
          EXPECT_NEAR(t.integral(), static_cast<double>(expected), 1e-9 * static_cast<double>(expected) + 1e-300);
        }
      }
    }
  }
}

TEST(Boxcars, SweepMatchesDirectSum) {
  const auto blocks = random_blocks(3, 60, wavy, 21);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-0.01, 1.01);
  for (double alpha : {0.0, 2.0, -0.5}) {
    const auto local = local_sensitivity(blocks, 2, {alpha, 1e-3});
    for (int s = 0; s < 400; ++s) {
      const double x = u(rng);
      for (std::size_t j = 0; j < 3; ++j) {
        const double direct = oracle::local_sensitivity_at(blocks, 2, j, alpha, 1e-3, x);
        EXPECT_NEAR(local.output(j).value_at(x), direct, 1e-9 * std::max(1.0, direct));
      }
    }
  }
}

TEST(Boxcars, OutputsShareOneBreakpointSet) {
  const std::size_t n = 150;
  const auto blocks = random_blocks(3, n, wavy, 5);
  for (std::size_t i = 0; i < 3; ++i) {
    const auto local = local_sensitivity(blocks, i, {2.0, 1e-4});
    EXPECT_LE(local.breakpoints.size(), 2 * n + 2);
    for (std::size_t j = 0; j < 3; ++j) {
      EXPECT_EQ(local.values[j].size() + 1, local.breakpoints.size());
      EXPECT_EQ(boxcar_contributions(blocks, i, j, {2.0, 1e-4}).breakpoints, local.breakpoints);
    }
  }
}

TEST(CumulativeLocal, SingleBoxcar) {
  const std::vector<EvaluationBlock> blocks{single_block(0.2, 0.6, 2.0, 0.0)};
  const auto t = boxcar_contributions(blocks, 0, 0, {2.0, 1e-12});
  const auto curve = cumulative_local(t, 2.0, 1);
  ASSERT_TRUE(curve);
  EXPECT_EQ(curve->value_at(0.1), 0.0);
  EXPECT_NEAR(curve->value_at(0.6), 1.0, 1e-9);
  EXPECT_NEAR(curve->value_at(0.4), 0.5, 1e-9);
  EXPECT_FALSE(cumulative_local(t, 0.0, 1));
}

TEST(CumulativeLocal, TerminalValueRecoversTotalIndex) {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const auto blocks = random_blocks(3, 80 + 40 * seed, wavy, seed);
    const auto v = estimate_variance(blocks);
    const auto total = estimate_total(blocks);
    for (std::size_t i = 0; i < 3; ++i) {
      for (std::size_t j = 0; j < 3; ++j) {
        const auto t = boxcar_contributions(blocks, i, j, {2.0, 1e-4});
        const auto curve = cumulative_local(t, v[j], blocks.size());
        ASSERT_TRUE(curve);
        EXPECT_NEAR(curve->terminal(), total.values(i, j), 1e-9 * std::abs(total.values(i, j)) + 1e-15);
      }
    }
  }
}

TEST(CumulativeLocal, SyntheticFirstInputTotal) {
  const auto params = SyntheticModelParams::reference();
  const auto blocks = sobol_blocks(3, 1000, [&](std::span<const double> x) { return synthetic_final(x, params); });
  const auto t = boxcar_contributions(blocks, 0, 1, {2.0, 1e-4});
  const auto curve = cumulative_local(t, estimate_variance(blocks)[1], blocks.size());
  ASSERT_TRUE(curve);
  EXPECT_NEAR(curve->value_at(1.0 + 1e-3), 0.94, 0.06);
}

TEST(Density, AlphaZeroIsUniformOverSupport) {
  const auto blocks = random_blocks(3, 30, wavy, 7);
  const auto local = local_sensitivity(blocks, 0, {0.0, 1e-4});
  const auto tau = sensitivity_density(local.output(0), local.output(0));
  const double lo = tau.breakpoints.front();
  const double hi = tau.breakpoints.back();
  for (double v : tau.values) EXPECT_NEAR(v, 1.0 / (hi - lo), 1e-9);
  EXPECT_NEAR(tau.integral(), 1.0, 1e-12);
}

TEST(Density, SingleObservationIsUniformOnItsInterval) {
  const std::vector<EvaluationBlock> blocks{single_block(0.3, 0.5, 1.0, 4.0)};
  const auto t2 = boxcar_contributions(blocks, 0, 0, {2.0, 1e-4});
  const auto t0 = boxcar_contributions(blocks, 0, 0, {0.0, 1e-4});
  const auto tau = sensitivity_density(t2, t0);
  ASSERT_EQ(tau.values.size(), 1u);
  EXPECT_NEAR(tau.values[0], 1.0 / (0.2 + 1e-4), 1e-9);
}

TEST(Density, UnitIntegralForAnyInput) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto blocks = random_blocks(3, 50, wavy, seed);
    for (double alpha : {-1.0, 1.0, 2.0, 4.0}) {
      const auto ta = local_sensitivity(blocks, 2, {alpha, 1e-4});
      const auto t0 = local_sensitivity(blocks, 2, {0.0, 1e-4});
      for (auto support : {DensitySupport::observed, DensitySupport::unit_interval}) {
        const auto tau = sensitivity_density(ta.output(0), t0.output(0), support);
        EXPECT_NEAR(tau.integral(), 1.0, 1e-12);
        EXPECT_NO_THROW(tau.validate());
      }
    }
  }
}

TEST(Density, UnitIntervalFillsUnobservedGapsWithMeanRatio) {
  // Observations cover [0.2, 0.4] only.
  std::vector<EvaluationBlock> blocks{single_block(0.2, 0.4, 0.0, 1.0)};
  const auto ta = boxcar_contributions(blocks, 0, 0, {2.0, 1e-6});
  const auto t0 = boxcar_contributions(blocks, 0, 0, {0.0, 1e-6});
  const auto tau = sensitivity_density(ta, t0, DensitySupport::unit_interval);
  EXPECT_EQ(tau.breakpoints.front(), 0.0);
  EXPECT_EQ(tau.breakpoints.back(), 1.0);
  EXPECT_NEAR(tau.value_at(0.1), tau.value_at(0.3), 1e-12);
  EXPECT_NEAR(tau.value_at(0.9), tau.value_at(0.3), 1e-12);
  EXPECT_NEAR(tau.value_at(0.5), 1.0, 1e-5);
}

TEST(Density, Errors) {
  const PiecewiseConstantDensity zero{{0.0, 1.0}, {0.0}};
  try {
    sensitivity_density(zero, zero);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::degenerate_density);
  }
  const PiecewiseConstantDensity other{{0.0, 0.5}, {1.0}};
  EXPECT_THROW(sensitivity_density(other, PiecewiseConstantDensity{{0.0, 1.0}, {1.0}}), Error);
}

TEST(Average, Examples) {
  const PiecewiseConstantDensity tau{{0.1, 0.3, 0.9}, {2.0, 1.0}};
  const std::vector<PiecewiseConstantDensity> one{tau};
  EXPECT_EQ(average_density(one), tau);

  const std::vector<PiecewiseConstantDensity> halves{{{0.0, 0.5}, {2.0}}, {{0.5, 1.0}, {2.0}}};
  const auto avg = average_density(halves);
  ASSERT_EQ(avg.breakpoints, (std::vector<double>{0.0, 0.5, 1.0}));
  EXPECT_EQ(avg.values, (std::vector<double>{1.0, 1.0}));

  const std::vector<PiecewiseConstantDensity> same{tau, tau, tau};
  const auto avg3 = average_density(same);
  for (std::size_t k = 0; k < tau.values.size(); ++k) EXPECT_NEAR(avg3.values[k], tau.values[k], 1e-15);
  EXPECT_NEAR(avg3.integral(), 1.0, 1e-12);
}

TEST(CumulativeDensity, Examples) {
  const auto identity = cumulative_density({{0.0, 1.0}, {1.0}});
  EXPECT_EQ(identity, CumulativeCurve::identity());

  const auto half = cumulative_density({{0.5, 1.0}, {2.0}});
  EXPECT_EQ(half.value_at(0.5), 0.0);
  EXPECT_NEAR(half.value_at(0.75), 0.5, 1e-15);
  EXPECT_EQ(half.value_at(1.0), 1.0);
}

TEST(CumulativeDensity, NondecreasingAndNormalized) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto blocks = random_blocks(3, 40, wavy, seed);
    const auto ta = local_sensitivity(blocks, 1, {2.0, 1e-4});
    const auto t0 = local_sensitivity(blocks, 1, {0.0, 1e-4});
    std::vector<PiecewiseConstantDensity> taus;
    for (std::size_t j = 0; j < 3; ++j) {
      try {
        taus.push_back(sensitivity_density(ta.output(j), t0.output(j)));
      } catch (const Error&) {
      }
    }
    const auto curve = cumulative_density(average_density(taus));
    EXPECT_EQ(curve.terminal(), 1.0);
    EXPECT_TRUE(std::is_sorted(curve.cumulative.begin(), curve.cumulative.end()));
  }
}

TEST(InverseCdf, Examples) {
  EXPECT_EQ(inverse_cdf(CumulativeCurve::identity(), 0.3), 0.3);
  const auto half = cumulative_density({{0.5, 1.0}, {2.0}});
  EXPECT_EQ(inverse_cdf(half, 0.5), 0.75);
  // Zero density on (0.4, 0.6): the curve is flat at 0.4 there.
  const auto gap = cumulative_density({{0.0, 0.4, 0.6, 1.0}, {1.25, 0.0, 1.25}});
  EXPECT_NEAR(gap.value_at(0.5), 0.5, 1e-15);
  EXPECT_EQ(inverse_cdf(gap, gap.value_at(0.4)), 0.4);
}

TEST(InverseCdf, ClampsToUnitInterval) {
  const auto wide = cumulative_density({{-0.5, 1.5}, {0.5}});
  EXPECT_EQ(inverse_cdf(wide, 0.1), 0.0);
  EXPECT_EQ(inverse_cdf(wide, 0.9), 1.0);
  EXPECT_NEAR(inverse_cdf(wide, 0.5), 0.5, 1e-15);
}

TEST(InverseCdf, RoundTripOnGrid) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto blocks = random_blocks(2, 25, [](std::span<const double> x) {
      return std::vector<double>{x[0] > 0.7 ? 3.0 : x[1]};
    }, seed);
    const auto ta = local_sensitivity(blocks, 0, {2.0, 1e-4});
    const auto t0 = local_sensitivity(blocks, 0, {0.0, 1e-4});
    const auto curve = cumulative_density(sensitivity_density(ta.output(0), t0.output(0)));
    for (int g = 1; g <= 99; ++g) {
      const double u = g / 100.0;
      const double x = inverse_cdf(curve, u);
      if (x > 0.0 && x < 1.0) {
        EXPECT_NEAR(curve.value_at(x), u, 1e-9);
      }
    }
  }
}

TEST(Density, ValidateRejectsBadInput) {
  EXPECT_THROW((PiecewiseConstantDensity{{0.0, 1.0}, {-1.0}}).validate(), Error);
  EXPECT_THROW((PiecewiseConstantDensity{{1.0, 0.0}, {1.0}}).validate(), Error);
  EXPECT_THROW((PiecewiseConstantDensity{{0.0, 1.0}, {1.0, 2.0}}).validate(), Error);
  EXPECT_NO_THROW((PiecewiseConstantDensity{{0.0, 0.5, 1.0}, {0.0, 2.0}}).validate());
}
