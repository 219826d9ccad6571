#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sensa/error.hpp"
#include "sensa/estimators.hpp"

namespace sensa {

/// Piecewise-constant function: `values[k]` holds on [breakpoints[k], breakpoints[k+1]),
/// zero outside the breakpoint range.
struct PiecewiseConstantDensity {
  std::vector<double> breakpoints;
  std::vector<double> values;

  bool empty() const noexcept { return values.empty(); }

  double integral() const {
    long double sum = 0.0L;
    for (std::size_t k = 0; k < values.size(); ++k) {
      sum += static_cast<long double>(values[k]) * (breakpoints[k + 1] - breakpoints[k]);
    }
    return static_cast<double>(sum);
  }

  double value_at(double x) const {
    if (values.empty() || x < breakpoints.front() || x >= breakpoints.back()) return 0.0;
    const auto it = std::upper_bound(breakpoints.begin(), breakpoints.end(), x);
    return values[static_cast<std::size_t>(it - breakpoints.begin()) - 1];
  }

  /// Throws a validation error unless breakpoints ascend strictly and values are finite and >= 0.
  void validate() const {
    if (breakpoints.empty() && values.empty()) return;
    if (values.size() + 1 != breakpoints.size()) {
      throw Error(ErrorKind::validation, "density needs exactly one value per interval");
    }
    for (std::size_t k = 0; k + 1 < breakpoints.size(); ++k) {
      if (!std::isfinite(breakpoints[k]) || !(breakpoints[k] < breakpoints[k + 1])) {
        throw Error(ErrorKind::validation, "density breakpoints must be finite and strictly ascending");
      }
    }
    for (double v : values) {
      if (!std::isfinite(v) || v < 0.0) {
        throw Error(ErrorKind::validation, "density values must be finite and nonnegative");
      }
    }
  }

  friend bool operator==(const PiecewiseConstantDensity&, const PiecewiseConstantDensity&) = default;
};

/// Piecewise-linear nondecreasing curve through (breakpoints[k], cumulative[k]);
/// constant beyond either end.
struct CumulativeCurve {
  std::vector<double> breakpoints;
  std::vector<double> cumulative;

  static CumulativeCurve identity() { return {{0.0, 1.0}, {0.0, 1.0}}; }

  double terminal() const { return cumulative.empty() ? 0.0 : cumulative.back(); }

  double value_at(double x) const {
    if (breakpoints.empty()) return 0.0;
    if (x <= breakpoints.front()) return cumulative.front();
    if (x >= breakpoints.back()) return cumulative.back();
    const auto k = static_cast<std::size_t>(
        std::upper_bound(breakpoints.begin(), breakpoints.end(), x) - breakpoints.begin() - 1);
    const double w = (x - breakpoints[k]) / (breakpoints[k + 1] - breakpoints[k]);
    return cumulative[k] + w * (cumulative[k + 1] - cumulative[k]);
  }

  friend bool operator==(const CumulativeCurve&, const CumulativeCurve&) = default;
};

struct AlphaEpsilon {
  double alpha = 2.0;
  double epsilon = 1e-4;

  void validate() const {
    if (!std::isfinite(alpha)) throw Error(ErrorKind::validation, "alpha must be finite");
    if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
      throw Error(ErrorKind::validation, "epsilon must be positive");
    }
  }
};

/// One observation's contribution to dimension i: the epsilon-widened interval
/// between xa_i and xb_i and the raw output differences |yA_j - yAB(i)_j|.
struct Boxcar {
  double start = 0.0;
  double end = 0.0;
  double length = 0.0;  // |xa_i - xb_i| + epsilon
  std::uint64_t row = 0;
  std::vector<double> deltas;

  friend bool operator<(const Boxcar& a, const Boxcar& b) {
    if (a.start != b.start) return a.start < b.start;
    if (a.end != b.end) return a.end < b.end;
    return a.row < b.row;
  }
};

inline Boxcar make_boxcar(const EvaluationBlock& block, std::size_t i, double epsilon) {
  const double lo = std::min(block.xa[i], block.xb[i]);
  const double hi = std::max(block.xa[i], block.xb[i]);
  Boxcar box{lo - epsilon / 2.0, hi + epsilon / 2.0, (hi - lo) + epsilon, block.row, {}};
  box.deltas.resize(block.outputs());
  for (std::size_t j = 0; j < block.outputs(); ++j) box.deltas[j] = std::abs(block.ya[j] - block.yab(i, j));
  return box;
}

/// Local sensitivity of every output against one input, on a shared breakpoint set.
struct LocalSensitivity {
  std::vector<double> breakpoints;
  std::vector<std::vector<double>> values;  // values[j][segment]
  std::vector<std::size_t> dropped;         // zero-difference terms skipped for alpha < 0

  PiecewiseConstantDensity output(std::size_t j) const { return {breakpoints, values.at(j)}; }
};

namespace detail {

inline double boxcar_numerator(double delta, double alpha, bool& dropped) {
  dropped = false;
  if (alpha == 0.0) return 1.0;
  if (delta == 0.0) {
    dropped = alpha < 0.0;
    return 0.0;
  }
  if (alpha == 2.0) return delta * delta;
  return std::pow(delta, alpha);
}

}  // namespace detail

/// Exact endpoint sweep over sorted boxcars. Each boxcar has height
/// |dy|^alpha / (|dx| + eps) over a support of length |dx| + eps, so it
/// integrates to |dy|^alpha exactly.
inline LocalSensitivity sweep_boxcars(std::span<const Boxcar> boxes, std::size_t outputs, double alpha) {
  LocalSensitivity out;
  out.values.assign(outputs, {});
  out.dropped.assign(outputs, 0);
  if (boxes.empty()) return out;

  struct Event {
    double position;
    std::size_t box;
    bool opens;
  };
  std::vector<Event> events;
  events.reserve(2 * boxes.size());
  for (std::size_t b = 0; b < boxes.size(); ++b) {
    events.push_back({boxes[b].start, b, true});
    events.push_back({boxes[b].end, b, false});
  }
  std::stable_sort(events.begin(), events.end(),
                   [](const Event& a, const Event& b) { return a.position < b.position; });

  std::vector<std::vector<double>> heights(boxes.size(), std::vector<double>(outputs));
  for (std::size_t b = 0; b < boxes.size(); ++b) {
    for (std::size_t j = 0; j < outputs; ++j) {
      bool dropped = false;
      heights[b][j] = detail::boxcar_numerator(boxes[b].deltas[j], alpha, dropped) / boxes[b].length;
      if (dropped) ++out.dropped[j];
    }
  }

  std::vector<long double> running(outputs, 0.0L);
  std::size_t active = 0;
  for (std::size_t e = 0; e < events.size();) {
    const double position = events[e].position;
    for (; e < events.size() && events[e].position == position; ++e) {
      const auto& h = heights[events[e].box];
      const long double sign = events[e].opens ? 1.0L : -1.0L;
      for (std::size_t j = 0; j < outputs; ++j) running[j] += sign * h[j];
      events[e].opens ? ++active : --active;
    }
    out.breakpoints.push_back(position);
    if (e == events.size()) break;
    if (active == 0) std::fill(running.begin(), running.end(), 0.0L);
    for (std::size_t j = 0; j < outputs; ++j) {
      out.values[j].push_back(std::max(0.0, static_cast<double>(running[j])));
    }
  }
  return out;
}

inline std::vector<Boxcar> collect_boxcars(std::span<const EvaluationBlock> blocks, std::size_t i,
                                           double epsilon) {
  std::vector<Boxcar> boxes;
  boxes.reserve(blocks.size());
  for (const auto& b : blocks) boxes.push_back(make_boxcar(b, i, epsilon));
  std::sort(boxes.begin(), boxes.end());
  return boxes;
}

inline LocalSensitivity local_sensitivity(std::span<const EvaluationBlock> blocks, std::size_t i,
                                          const AlphaEpsilon& params) {
  detail::check_blocks(blocks);
  params.validate();
  if (i >= blocks.front().inputs()) {
    throw Error(ErrorKind::index_out_of_range, "input dimension " + std::to_string(i + 1));
  }
  const auto boxes = collect_boxcars(blocks, i, params.epsilon);
  return sweep_boxcars(boxes, blocks.front().outputs(), params.alpha);
}

/// t_ij(x) for 0-based input i and output j.
inline PiecewiseConstantDensity boxcar_contributions(std::span<const EvaluationBlock> blocks,
                                                     std::size_t i, std::size_t j,
                                                     const AlphaEpsilon& params,
                                                     std::size_t* dropped = nullptr) {
  auto local = local_sensitivity(blocks, i, params);
  if (j >= local.values.size()) {
    throw Error(ErrorKind::index_out_of_range, "output " + std::to_string(j + 1));
  }
  if (dropped) *dropped = local.dropped[j];
  return local.output(j);
}

/// T(x) = (1 / (2 N V)) * integral of t up to x. Empty when V = 0.
inline std::optional<CumulativeCurve> cumulative_local(const PiecewiseConstantDensity& t,
                                                       double variance, std::size_t samples) {
  if (!(variance > 0.0) || samples == 0) return std::nullopt;
  const long double scale = 1.0L / (2.0L * static_cast<long double>(samples) * variance);
  CumulativeCurve curve;
  curve.breakpoints = t.breakpoints;
  curve.cumulative.reserve(t.breakpoints.size());
  long double sum = 0.0L;
  if (!t.breakpoints.empty()) curve.cumulative.push_back(0.0);
  for (std::size_t k = 0; k < t.values.size(); ++k) {
    sum += static_cast<long double>(t.values[k]) * (t.breakpoints[k + 1] - t.breakpoints[k]);
    curve.cumulative.push_back(static_cast<double>(sum * scale));
  }
  return curve;
}

enum class DensitySupport {
  observed,       // zero wherever no observation interval reaches
  unit_interval,  // unobserved parts of [0, 1] take the mean observed ratio
};

/// tau = (t_alpha / t_zero) normalized to unit integral; the ratio is zero where
/// t_zero vanishes unless `support` asks for the unit interval to be filled.
inline PiecewiseConstantDensity sensitivity_density(const PiecewiseConstantDensity& t_alpha,
                                                    const PiecewiseConstantDensity& t_zero,
                                                    DensitySupport support = DensitySupport::observed) {
  if (t_alpha.breakpoints != t_zero.breakpoints) {
    throw Error(ErrorKind::validation, "t_alpha and t_zero must share breakpoints");
  }
  const auto& bp = t_zero.breakpoints;
  std::vector<double> ratio(t_zero.values.size(), 0.0);
  std::vector<bool> observed(t_zero.values.size(), false);
  bool any = false;
  for (std::size_t k = 0; k < ratio.size(); ++k) {
    if (t_zero.values[k] > 0.0) {
      ratio[k] = t_alpha.values[k] / t_zero.values[k];
      observed[k] = true;
      any = true;
    }
  }
  if (!any) throw Error(ErrorKind::degenerate_density, "t_zero is identically zero");

  PiecewiseConstantDensity tau;
  if (support == DensitySupport::observed) {
    tau = {bp, std::move(ratio)};
  } else {
    // Unobserved parts of [0, 1] take the mean of the ratio over the observed support.
    long double observed_mass = 0.0L;
    long double observed_length = 0.0L;
    for (std::size_t k = 0; k < ratio.size(); ++k) {
      if (!observed[k]) continue;
      observed_mass += static_cast<long double>(ratio[k]) * (bp[k + 1] - bp[k]);
      observed_length += bp[k + 1] - bp[k];
    }
    const double fill = static_cast<double>(observed_mass / observed_length);
    std::vector<double> points;
    std::vector<double> values;
    if (bp.front() > 0.0) {
      points.push_back(0.0);
      values.push_back(fill);
    }
    for (std::size_t k = 0; k < ratio.size(); ++k) {
      points.push_back(bp[k]);
      const bool inside = bp[k + 1] > 0.0 && bp[k] < 1.0;
      values.push_back(observed[k] || !inside ? ratio[k] : fill);
    }
    points.push_back(bp.back());
    if (bp.back() < 1.0) {
      values.push_back(fill);
      points.push_back(1.0);
    }
    tau = {std::move(points), std::move(values)};
  }

  const double mass = tau.integral();
  if (!(mass > 0.0) || !std::isfinite(mass)) {
    throw Error(ErrorKind::degenerate_density, "sensitivity ratio has zero mass");
  }
  for (double& v : tau.values) v /= mass;
  return tau;
}

/// Pointwise mean of densities on the merged breakpoint set.
inline PiecewiseConstantDensity average_density(std::span<const PiecewiseConstantDensity> taus) {
  if (taus.empty()) throw Error(ErrorKind::insufficient_data, "no densities to average");
  if (taus.size() == 1) return taus.front();
  std::vector<double> merged;
  for (const auto& tau : taus) merged.insert(merged.end(), tau.breakpoints.begin(), tau.breakpoints.end());
  std::sort(merged.begin(), merged.end());
  merged.erase(std::unique(merged.begin(), merged.end()), merged.end());

  PiecewiseConstantDensity avg{merged, std::vector<double>(merged.empty() ? 0 : merged.size() - 1, 0.0)};
  const double weight = 1.0 / static_cast<double>(taus.size());
  for (const auto& tau : taus) {
    for (std::size_t k = 0; k < avg.values.size(); ++k) {
      avg.values[k] += weight * tau.value_at(0.5 * (merged[k] + merged[k + 1]));
    }
  }
  return avg;
}

/// Cumulative distribution of a density, rescaled so the final value is exactly 1.
inline CumulativeCurve cumulative_density(const PiecewiseConstantDensity& density) {
  if (density.empty()) throw Error(ErrorKind::degenerate_density, "empty density");
  CumulativeCurve curve;
  curve.breakpoints = density.breakpoints;
  std::vector<long double> sums{0.0L};
  long double sum = 0.0L;
  for (std::size_t k = 0; k < density.values.size(); ++k) {
    sum += static_cast<long double>(density.values[k]) *
           (density.breakpoints[k + 1] - density.breakpoints[k]);
    sums.push_back(sum);
  }
  if (!(sum > 0.0L)) throw Error(ErrorKind::degenerate_density, "density has zero mass");
  curve.cumulative.reserve(sums.size());
  for (auto s : sums) curve.cumulative.push_back(static_cast<double>(s / sum));
  curve.cumulative.back() = 1.0;
  return curve;
}

/// Smallest x with curve(x) >= u, clamped to [0, 1]. Flat stretches resolve
/// to their left end.
inline double inverse_cdf(const CumulativeCurve& curve, double u) {
  const auto& bp = curve.breakpoints;
  const auto& c = curve.cumulative;
  if (bp.empty()) return std::clamp(u, 0.0, 1.0);
  const auto b = static_cast<std::size_t>(std::lower_bound(c.begin(), c.end(), u) - c.begin());
  double x;
  if (b == 0) {
    x = bp.front();
  } else if (b == c.size()) {
    x = bp.back();
  } else {
    const double w = (u - c[b - 1]) / (c[b] - c[b - 1]);
    x = bp[b - 1] + w * (bp[b] - bp[b - 1]);
  }
  return std::clamp(x, 0.0, 1.0);
}

}  // namespace sensa
