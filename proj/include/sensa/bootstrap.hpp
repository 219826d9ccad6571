#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "sensa/estimators.hpp"
#include "sensa/regional.hpp"

namespace sensa {

struct BootstrapSpec {
  std::size_t replicates = 0;
  std::uint64_t seed = 0;
};

/// Whole blocks drawn with replacement; replicate r uses seed + r.
inline std::vector<EvaluationBlock> resample_blocks(std::span<const EvaluationBlock> blocks, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, blocks.size() - 1);
  std::vector<EvaluationBlock> out;
  out.reserve(blocks.size());
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    out.push_back(blocks[pick(rng)]);
    out.back().row = k + 1;  // resampled copies keep a canonical order
  }
  return out;
}

/// Cumulative local sensitivity curves of replicate block sets. A replicate
/// with zero variance for output j yields no curve.
inline std::vector<CumulativeCurve> bootstrap_curves(std::span<const EvaluationBlock> blocks, std::size_t i,
                                                     std::size_t j, const AlphaEpsilon& params,
                                                     const BootstrapSpec& spec) {
  detail::check_blocks(blocks);
  std::vector<CumulativeCurve> curves;
  curves.reserve(spec.replicates);
  for (std::size_t r = 0; r < spec.replicates; ++r) {
    const auto sample = resample_blocks(blocks, spec.seed + r);
    const auto variance = estimate_variance(sample);
    const auto t = boxcar_contributions(sample, i, j, params);
    if (auto curve = cumulative_local(t, variance.at(j), sample.size())) curves.push_back(std::move(*curve));
  }
  return curves;
}

inline std::vector<SensitivityIndices> bootstrap_indices(std::span<const EvaluationBlock> blocks,
                                                         const BootstrapSpec& spec) {
  detail::check_blocks(blocks);
  std::vector<SensitivityIndices> out;
  out.reserve(spec.replicates);
  for (std::size_t r = 0; r < spec.replicates; ++r) {
    out.push_back(estimate_indices(resample_blocks(blocks, spec.seed + r)));
  }
  return out;
}

/// Linear-interpolated sample quantile (q in [0, 1]) of unsorted values.
inline double quantile(std::vector<double> values, double q) {
  if (values.empty()) return std::nan("");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
  bool contains(double v) const { return lower <= v && v <= upper; }
};

/// Pointwise percentile band of curves evaluated on `grid`.
inline std::vector<Interval> percentile_band(std::span<const CumulativeCurve> curves, std::span<const double> grid,
                                             double level = 0.95) {
  const double tail = (1.0 - level) / 2.0;
  std::vector<Interval> band;
  band.reserve(grid.size());
  std::vector<double> values(curves.size());
  for (double x : grid) {
    for (std::size_t c = 0; c < curves.size(); ++c) values[c] = curves[c].value_at(x);
    band.push_back({quantile(values, tail), quantile(values, 1.0 - tail)});
  }
  return band;
}

/// Percentile intervals for every S_ij and T_ij across replicates.
struct IndexIntervals {
  std::vector<std::vector<Interval>> first_order;  // [i][j]
  std::vector<std::vector<Interval>> total;
};

inline IndexIntervals index_intervals(std::span<const SensitivityIndices> replicates, double level = 0.95) {
  IndexIntervals out;
  if (replicates.empty()) return out;
  const double tail = (1.0 - level) / 2.0;
  const auto m = replicates.front().total.rows();
  const auto n = replicates.front().total.cols();
  out.first_order.assign(m, std::vector<Interval>(n));
  out.total.assign(m, std::vector<Interval>(n));
  std::vector<double> s;
  std::vector<double> t;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      s.clear();
      t.clear();
      for (const auto& rep : replicates) {
        if (!rep.defined[j]) continue;
        s.push_back(rep.first_order(i, j));
        t.push_back(rep.total(i, j));
      }
      out.first_order[i][j] = {quantile(s, tail), quantile(s, 1.0 - tail)};
      out.total[i][j] = {quantile(t, tail), quantile(t, 1.0 - tail)};
    }
  }
  return out;
}

}  // namespace sensa
