#pragma once

// Independent reference computations used only by the tests.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <vector>

#include "sensa/estimators.hpp"

namespace sensa::oracle {

/// Closed-form variance decomposition of the Ishigami function (a = 7, b = 0.1).
struct IshigamiTruth {
  double first[3];
  double total[3];
};

inline IshigamiTruth ishigami_truth(double a = 7.0, double b = 0.1) {
  const double pi = std::numbers::pi;
  const double pi4 = std::pow(pi, 4);
  const double pi8 = std::pow(pi, 8);
  const double v = a * a / 8.0 + b * pi4 / 5.0 + b * b * pi8 / 18.0 + 0.5;
  const double v1 = 0.5 * std::pow(1.0 + b * pi4 / 5.0, 2);
  const double v2 = a * a / 8.0;
  const double v13 = 8.0 * b * b * pi8 / 225.0;
  return {{v1 / v, v2 / v, 0.0}, {(v1 + v13) / v, v2 / v, v13 / v}};
}

/// Plain Monte-Carlo variance of each output over uniform inputs.
template <typename F>
std::vector<double> monte_carlo_variance(F&& f, std::size_t inputs, std::size_t samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> x(inputs);
  std::vector<long double> sum, sum2;
  for (std::size_t s = 0; s < samples; ++s) {
    for (auto& v : x) v = u(rng);
    const auto y = f(std::span<const double>(x));
    if (sum.empty()) {
      sum.assign(y.size(), 0.0L);
      sum2.assign(y.size(), 0.0L);
    }
    for (std::size_t j = 0; j < y.size(); ++j) {
      sum[j] += y[j];
      sum2[j] += static_cast<long double>(y[j]) * y[j];
    }
  }
  std::vector<double> var(sum.size());
  const long double n = static_cast<long double>(samples);
  for (std::size_t j = 0; j < sum.size(); ++j) var[j] = static_cast<double>((sum2[j] - sum[j] * sum[j] / n) / (n - 1));
  return var;
}

/// t_ij(x) straight from its definition: sum over blocks of
/// |dy|^alpha / (|dx| + eps) on the widened interval.
inline double local_sensitivity_at(std::span<const EvaluationBlock> blocks, std::size_t i, std::size_t j, double alpha,
                                   double epsilon, double x) {
  double sum = 0.0;
  for (const auto& b : blocks) {
    const double lo = std::min(b.xa[i], b.xb[i]) - epsilon / 2;
    const double hi = std::max(b.xa[i], b.xb[i]) + epsilon / 2;
    if (x < lo || x > hi) continue;
    const double dy = std::abs(b.ya[j] - b.yab(i, j));
    if (alpha < 0 && dy == 0) continue;
    const double num = alpha == 0 ? 1.0 : std::pow(dy, alpha);
    sum += num / (std::abs(b.xa[i] - b.xb[i]) + epsilon);
  }
  return sum;
}

}  // namespace sensa::oracle
