#include <gtest/gtest.h>

#include "helpers.hpp"
#include "oracles.hpp"
#include "sensa/bootstrap.hpp"
#include "sensa/models.hpp"

using namespace sensa;
using sensa::testing::random_blocks;
using sensa::testing::sobol_blocks;

namespace {

std::vector<double> mixed(std::span<const double> x) {
  return {x[0] * x[0] + std::sin(3 * x[1]) * x[2], x[1] > 0.5 ? 1.0 + x[0] : x[0]};
}

const std::vector<double> kGrid{0.0, 0.1, 0.25, 0.5, 0.75, 0.9, 1.0, 1.01};

}  // namespace

TEST(Bootstrap, ZeroReplicates) {
  const auto blocks = random_blocks(3, 20, mixed, 1);
  EXPECT_TRUE(bootstrap_curves(blocks, 0, 0, {}, {0, 7}).empty());
  EXPECT_TRUE(bootstrap_indices(blocks, {0, 7}).empty());
  EXPECT_TRUE(index_intervals(std::vector<SensitivityIndices>{}).total.empty());
}

TEST(Bootstrap, ResampleKeepsSizeAndRenumbers) {
  const auto blocks = random_blocks(3, 30, mixed, 2);
  const auto sample = resample_blocks(blocks, 11);
  ASSERT_EQ(sample.size(), blocks.size());
  for (std::size_t k = 0; k < sample.size(); ++k) {
    EXPECT_EQ(sample[k].row, k + 1);
    const auto match = std::find_if(blocks.begin(), blocks.end(), [&](const auto& b) { return b.xa == sample[k].xa; });
    EXPECT_NE(match, blocks.end());
  }
}

TEST(Bootstrap, IdenticalBlocksGiveZeroWidthBands) {
  auto blocks = random_blocks(3, 1, mixed, 3);
  for (int k = 0; k < 9; ++k) {
    blocks.push_back(blocks.front());
    blocks.back().row = blocks.size();
  }
  const auto curves = bootstrap_curves(blocks, 0, 0, {2.0, 1e-4}, {50, 1});
  ASSERT_EQ(curves.size(), 50u);
  for (const auto& band : percentile_band(curves, kGrid)) EXPECT_EQ(band.lower, band.upper);
}

TEST(Bootstrap, ReproducibleBySeed) {
  const auto blocks = random_blocks(3, 40, mixed, 4);
  const auto a = bootstrap_curves(blocks, 1, 1, {2.0, 1e-4}, {20, 99});
  const auto b = bootstrap_curves(blocks, 1, 1, {2.0, 1e-4}, {20, 99});
  const auto c = bootstrap_curves(blocks, 1, 1, {2.0, 1e-4}, {20, 100});
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
  // Replicate r depends only on seed + r.
  EXPECT_EQ(std::vector(a.begin() + 1, a.end()), std::vector(c.begin(), c.end() - 1));
}

TEST(Bootstrap, EachReplicateRecoversItsTotalIndex) {
  const auto blocks = random_blocks(3, 60, mixed, 5);
  const BootstrapSpec spec{25, 3};
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 2; ++j) {
      const auto curves = bootstrap_curves(blocks, i, j, {2.0, 1e-4}, spec);
      ASSERT_EQ(curves.size(), spec.replicates);
      for (std::size_t r = 0; r < curves.size(); ++r) {
        const auto total = estimate_total(resample_blocks(blocks, spec.seed + r)).values(i, j);
        EXPECT_NEAR(curves[r].terminal(), total, 1e-9 * std::abs(total) + 1e-15);
      }
    }
  }
}

TEST(Bootstrap, SingleDriverHasUnitTotalEverywhere) {
  const auto blocks = random_blocks(3, 50, [](std::span<const double> x) { return std::vector<double>{x[0], 2 * x[0]}; }, 6);
  for (const auto& curve : bootstrap_curves(blocks, 0, 1, {2.0, 1e-4}, {30, 0})) EXPECT_NEAR(curve.terminal(), 1.0, 1e-12);
  for (const auto& curve : bootstrap_curves(blocks, 2, 0, {2.0, 1e-4}, {30, 0})) EXPECT_EQ(curve.terminal(), 0.0);
}

TEST(Bootstrap, Quantile) {
  EXPECT_EQ(quantile({3.0, 1.0, 2.0}, 0.5), 2.0);
  EXPECT_EQ(quantile({0.0, 10.0}, 0.25), 2.5);
  EXPECT_EQ(quantile({4.0}, 0.9), 4.0);
  EXPECT_TRUE(std::isnan(quantile({}, 0.5)));
}

TEST(Bootstrap, BandsAreOrdered) {
  const auto blocks = random_blocks(3, 80, mixed, 8);
  const auto curves = bootstrap_curves(blocks, 0, 0, {2.0, 1e-4}, {100, 1});
  for (const auto& band : percentile_band(curves, kGrid)) EXPECT_LE(band.lower, band.upper);
}

TEST(Bootstrap, IshigamiIntervalsCoverTruth) {
  const auto truth = oracle::ishigami_truth();
  int covered = 0;
  int trials = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto blocks = random_blocks(3, 400, [](std::span<const double> x) { return ishigami(x); }, 100 + seed);
    const auto reps = bootstrap_indices(blocks, {100, seed});
    const auto iv = index_intervals(reps);
    for (std::size_t i = 0; i < 3; ++i) {
      covered += iv.total[i][0].contains(truth.total[i]);
      ++trials;
    }
  }
  EXPECT_GE(static_cast<double>(covered) / trials, 0.8) << covered << " of " << trials;
}
