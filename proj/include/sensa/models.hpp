#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "sensa/error.hpp"
#include "sensa/matrix.hpp"

namespace sensa {

/// Parameters of the synthetic discontinuous ODE test model
///   dy/dt = (kappa y) * z * (1 - (sigma y) * z)
/// with z_j = sum_i [j in L_i] [x_i >= xi_i] zeta_i (x_i - xi_i)^delta_i.
/// Products other than kappa y and sigma y are elementwise.
struct SyntheticModelParams {
  std::size_t inputs = 0;
  std::size_t outputs = 0;
  double final_time = 10.0;
  std::vector<std::vector<std::size_t>> mixing;  // L_i, 0-based output indices
  std::vector<int> degrees;                      // delta_i
  std::vector<double> locations;                 // xi_i
  std::vector<double> scales;                    // zeta_i
  std::vector<double> initial;                   // y(0)
  Matrix kappa;
  Matrix sigma;

  void validate() const {
    if (mixing.size() != inputs || degrees.size() != inputs || locations.size() != inputs ||
        scales.size() != inputs) {
      throw Error(ErrorKind::config, "synthetic model needs one L, delta, xi, zeta per input");
    }
    if (initial.size() != outputs || kappa.rows() != outputs || kappa.cols() != outputs ||
        sigma.rows() != outputs || sigma.cols() != outputs) {
      throw Error(ErrorKind::config, "synthetic model y0, kappa, sigma must match the output count");
    }
    for (const auto& set : mixing) {
      for (auto j : set) {
        if (j >= outputs) throw Error(ErrorKind::config, "mixing index outside the outputs");
      }
    }
    for (int d : degrees) {
      if (d < 0) throw Error(ErrorKind::config, "negative discontinuity degree");
    }
  }

  /// Three-input, three-output reference instance, parameters to 4 decimals.
  static SyntheticModelParams reference() {
    SyntheticModelParams p;
    p.inputs = 3;
    p.outputs = 3;
    p.final_time = 10.0;
    p.mixing = {{1, 2}, {0, 1}, {0, 1, 2}};
    p.degrees = {0, 1, 2};
    p.locations = {0.5933, 0.9485, 0.1030};
    p.scales = {0.8788, 0.2668, 0.6661};
    p.initial = {-0.1900, 0.5145, 0.4094};
    p.kappa = Matrix(3, 3);
    p.sigma = Matrix(3, 3);
    const double kappa[3][3] = {{0.7054, 0.2921, 0.7361}, {-0.1151, 0.5206, -0.0707}, {0.3475, -0.0579, -0.2229}};
    const double sigma[3][3] = {{0.0294, 0.1668, 0.5788}, {0.1046, 0.1705, 0.2749}, {-0.1258, -0.0712, 0.7372}};
    for (std::size_t r = 0; r < 3; ++r) {
      for (std::size_t c = 0; c < 3; ++c) {
        p.kappa(r, c) = kappa[r][c];
        p.sigma(r, c) = sigma[r][c];
      }
    }
    return p;
  }
};

inline std::vector<double> synthetic_z(std::span<const double> x, const SyntheticModelParams& params) {
  if (x.size() != params.inputs) {
    throw Error(ErrorKind::malformed_point, "synthetic model expects " + std::to_string(params.inputs) + " inputs");
  }
  std::vector<double> z(params.outputs, 0.0);
  for (std::size_t i = 0; i < params.inputs; ++i) {
    if (x[i] < params.locations[i]) continue;
    // pow(0, 0) == 1, so degree 0 is a pure step of height zeta_i.
    const double term = params.scales[i] * std::pow(x[i] - params.locations[i], params.degrees[i]);
    for (auto j : params.mixing[i]) z[j] += term;
  }
  return z;
}

namespace detail {

inline void synthetic_rhs(const SyntheticModelParams& p, std::span<const double> z, std::span<const double> y,
                          std::span<double> dy) {
  const std::size_t n = p.outputs;
  for (std::size_t r = 0; r < n; ++r) {
    double ky = 0.0;
    double sy = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
      ky += p.kappa(r, c) * y[c];
      sy += p.sigma(r, c) * y[c];
    }
    dy[r] = ky * z[r] * (1.0 - sy * z[r]);
  }
}

}  // namespace detail

/// Fixed-step RK4 from y(0); returns the state at each requested time.
inline std::vector<std::vector<double>> synthetic_eval(std::span<const double> x, std::span<const double> times,
                                                       const SyntheticModelParams& params, double step = 0.01) {
  const auto z = synthetic_z(x, params);
  const std::size_t n = params.outputs;
  std::vector<double> y = params.initial;
  std::vector<double> k1(n), k2(n), k3(n), k4(n), tmp(n);
  std::vector<std::vector<double>> out;
  out.reserve(times.size());
  double t = 0.0;
  for (double target : times) {
    if (target < t) throw Error(ErrorKind::validation, "times must be ascending from 0");
    const double span = target - t;
    const auto steps = static_cast<std::size_t>(std::ceil(span / step - 1e-9));
    const double h = steps ? span / static_cast<double>(steps) : 0.0;
    for (std::size_t s = 0; s < steps; ++s) {
      detail::synthetic_rhs(params, z, y, k1);
      for (std::size_t r = 0; r < n; ++r) tmp[r] = y[r] + 0.5 * h * k1[r];
      detail::synthetic_rhs(params, z, tmp, k2);
      for (std::size_t r = 0; r < n; ++r) tmp[r] = y[r] + 0.5 * h * k2[r];
      detail::synthetic_rhs(params, z, tmp, k3);
      for (std::size_t r = 0; r < n; ++r) tmp[r] = y[r] + h * k3[r];
      detail::synthetic_rhs(params, z, tmp, k4);
      for (std::size_t r = 0; r < n; ++r) {
        y[r] += h / 6.0 * (k1[r] + 2.0 * k2[r] + 2.0 * k3[r] + k4[r]);
        if (!std::isfinite(y[r])) {
          throw Error(ErrorKind::divergence,
                      "synthetic model state became non-finite at t = " + std::to_string(t + h * static_cast<double>(s + 1)));
        }
      }
    }
    t = target;
    out.push_back(y);
  }
  return out;
}

/// Synthetic model evaluated at its final time only.
inline std::vector<double> synthetic_final(std::span<const double> x, const SyntheticModelParams& params,
                                           double step = 0.01) {
  const double times[] = {params.final_time};
  return synthetic_eval(x, times, params, step).front();
}

/// Ishigami function (a = 7, b = 0.1) on [0,1]^3, mapped to (-pi, pi)^3.
inline std::vector<double> ishigami(std::span<const double> x) {
  if (x.size() != 3) throw Error(ErrorKind::malformed_point, "ishigami expects 3 inputs");
  constexpr double a = 7.0;
  constexpr double b = 0.1;
  double u[3];
  for (int i = 0; i < 3; ++i) u[i] = std::numbers::pi * (2.0 * x[i] - 1.0);
  const double s2 = std::sin(u[1]);
  return {std::sin(u[0]) + a * s2 * s2 + b * std::pow(u[2], 4) * std::sin(u[0])};
}

}  // namespace sensa
