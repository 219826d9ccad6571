#pragma once

#include <functional>
#include <random>
#include <span>
#include <vector>

#include "sensa/design.hpp"
#include "sensa/estimators.hpp"
#include "sensa/sobol.hpp"

namespace sensa::testing {

using Model = std::function<std::vector<double>(std::span<const double>)>;

/// Non-adaptive blocks for the first `rows` Sobol' rows of an m-input design.
inline std::vector<EvaluationBlock> sobol_blocks(std::size_t m, std::size_t rows, const Model& f,
                                                 std::uint64_t skip = 0) {
  SobolStream stream(2 * m);
  stream.skip(skip);
  const auto points = stream.next(rows);
  const auto design = build_design_rows(points, m, skip + 1);
  std::vector<EvaluationBlock> blocks;
  for (const auto& r : design) {
    EvaluationBlock b{r.row, 0, false, r.a, r.b, f(r.a), f(r.b), {}};
    b.yab = Matrix(m, b.ya.size());
    for (std::size_t i = 0; i < m; ++i) {
      const auto y = f(hybrid_point(r.a, r.b, i));
      std::copy(y.begin(), y.end(), b.yab.row(i).begin());
    }
    blocks.push_back(std::move(b));
  }
  return blocks;
}

/// Blocks from pseudo-random (not Sobol') points, for property tests.
inline std::vector<EvaluationBlock> random_blocks(std::size_t m, std::size_t rows, const Model& f, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<EvaluationBlock> blocks;
  for (std::size_t k = 0; k < rows; ++k) {
    Point a(m), b(m);
    for (auto& v : a) v = u(rng);
    for (auto& v : b) v = u(rng);
    EvaluationBlock blk{k + 1, 0, false, a, b, f(a), f(b), {}};
    blk.yab = Matrix(m, blk.ya.size());
    for (std::size_t i = 0; i < m; ++i) {
      const auto y = f(hybrid_point(a, b, i));
      std::copy(y.begin(), y.end(), blk.yab.row(i).begin());
    }
    blocks.push_back(std::move(blk));
  }
  return blocks;
}

inline EvaluationBlock single_block(double xa, double xb, double ya, double yab, double yb = 0.0) {
  EvaluationBlock b{1, 0, false, {xa}, {xb}, {ya}, {yb}, Matrix(1, 1)};
  b.yab(0, 0) = yab;
  return b;
}

}  // namespace sensa::testing
