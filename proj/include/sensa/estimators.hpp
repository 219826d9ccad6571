#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "sensa/error.hpp"
#include "sensa/matrix.hpp"
#include "sensa/sobol.hpp"

namespace sensa {

/// All observations for one design row k: the A and B points, their outputs,
/// and the outputs at every hybrid point AB(i) (row i of `yab`).
struct EvaluationBlock {
  std::uint64_t row = 0;
  std::int64_t batch = -1;  // -1 for ingested blocks
  bool adaptive = false;    // design point was drawn from a non-uniform density
  Point xa;
  Point xb;
  std::vector<double> ya;
  std::vector<double> yb;
  Matrix yab;

  std::size_t inputs() const noexcept { return xa.size(); }
  std::size_t outputs() const noexcept { return ya.size(); }

  friend bool operator==(const EvaluationBlock&, const EvaluationBlock&) = default;
};

/// m x n index table; column j is meaningless when `defined[j]` is false
/// (zero estimated variance for output j) and holds NaN there.
struct IndexTable {
  Matrix values;
  std::vector<bool> defined;
};

struct SensitivityIndices {
  Matrix first_order;  // m x n
  Matrix total;        // m x n
  std::vector<double> variance;
  std::vector<bool> defined;
  std::size_t samples = 0;
  bool biased = false;  // some blocks came from adaptively transformed designs
};

namespace detail {

inline void check_blocks(std::span<const EvaluationBlock> blocks) {
  if (blocks.empty()) throw Error(ErrorKind::insufficient_data, "no evaluation blocks");
  const auto m = blocks.front().inputs();
  const auto n = blocks.front().outputs();
  for (const auto& b : blocks) {
    if (b.inputs() != m || b.xb.size() != m || b.outputs() != n || b.yb.size() != n ||
        b.yab.rows() != m || b.yab.cols() != n) {
      throw Error(ErrorKind::validation,
                  "evaluation block " + std::to_string(b.row) + " has inconsistent shape");
    }
  }
}

/// Block order used for every reduction: ascending row index.
inline std::vector<const EvaluationBlock*> canonical_order(std::span<const EvaluationBlock> blocks) {
  std::vector<const EvaluationBlock*> order;
  order.reserve(blocks.size());
  for (const auto& b : blocks) order.push_back(&b);
  std::stable_sort(order.begin(), order.end(),
                   [](const EvaluationBlock* a, const EvaluationBlock* b) { return a->row < b->row; });
  return order;
}

inline double squared(double v) { return v * v; }

}  // namespace detail

/// Running sums behind the Jansen-form estimators. Adding blocks in
/// ascending row order reproduces the from-scratch estimates bit for bit.
class JansenSums {
 public:
  JansenSums() = default;
  JansenSums(std::size_t inputs, std::size_t outputs)
      : inputs_(inputs), outputs_(outputs), ab_(outputs, 0.0L),
        a_hybrid_(inputs * outputs, 0.0L), b_hybrid_(inputs * outputs, 0.0L) {}

  void add(const EvaluationBlock& block) {
    for (std::size_t j = 0; j < outputs_; ++j) {
      ab_[j] += detail::squared(block.ya[j] - block.yb[j]);
      for (std::size_t i = 0; i < inputs_; ++i) {
        a_hybrid_[i * outputs_ + j] += detail::squared(block.ya[j] - block.yab(i, j));
        b_hybrid_[i * outputs_ + j] += detail::squared(block.yb[j] - block.yab(i, j));
      }
    }
    ++count_;
  }

  std::size_t count() const noexcept { return count_; }
  std::size_t inputs() const noexcept { return inputs_; }
  std::size_t outputs() const noexcept { return outputs_; }

  std::vector<double> variance() const {
    if (count_ == 0) throw Error(ErrorKind::insufficient_data, "no evaluation blocks");
    std::vector<double> v(outputs_);
    for (std::size_t j = 0; j < outputs_; ++j) {
      v[j] = static_cast<double>(ab_[j] / (2.0L * static_cast<long double>(count_)));
    }
    return v;
  }

  IndexTable total() const { return ratio_table(a_hybrid_, false); }
  IndexTable first_order() const { return ratio_table(b_hybrid_, true); }

  /// Sum over blocks of (yA_j - yB_j)^2.
  long double denominator(std::size_t j) const { return ab_[j]; }
  /// Sum over blocks of (yA_j - yAB(i)_j)^2.
  long double total_numerator(std::size_t i, std::size_t j) const {
    return a_hybrid_[i * outputs_ + j];
  }

 private:
  IndexTable ratio_table(const std::vector<long double>& numerators, bool complement) const {
    if (count_ == 0) throw Error(ErrorKind::insufficient_data, "no evaluation blocks");
    IndexTable table{Matrix(inputs_, outputs_), std::vector<bool>(outputs_)};
    for (std::size_t j = 0; j < outputs_; ++j) {
      table.defined[j] = ab_[j] > 0.0L;
      for (std::size_t i = 0; i < inputs_; ++i) {
        double value = std::numeric_limits<double>::quiet_NaN();
        if (table.defined[j]) {
          const long double r = numerators[i * outputs_ + j] / ab_[j];
          value = static_cast<double>(complement ? 1.0L - r : r);
        }
        table.values(i, j) = value;
      }
    }
    return table;
  }

  std::size_t inputs_ = 0;
  std::size_t outputs_ = 0;
  std::size_t count_ = 0;
  std::vector<long double> ab_;
  std::vector<long double> a_hybrid_;
  std::vector<long double> b_hybrid_;
};

inline JansenSums accumulate(std::span<const EvaluationBlock> blocks) {
  detail::check_blocks(blocks);
  JansenSums sums(blocks.front().inputs(), blocks.front().outputs());
  for (const auto* b : detail::canonical_order(blocks)) sums.add(*b);
  return sums;
}

/// V_j = (1/2N) sum_k (yA_j - yB_j)^2
inline std::vector<double> estimate_variance(std::span<const EvaluationBlock> blocks) {
  return accumulate(blocks).variance();
}

/// T_ij = sum_k (yA_j - yAB(i)_j)^2 / sum_k (yA_j - yB_j)^2
inline IndexTable estimate_total(std::span<const EvaluationBlock> blocks) {
  return accumulate(blocks).total();
}

/// S_ij = 1 - sum_k (yB_j - yAB(i)_j)^2 / sum_k (yA_j - yB_j)^2. Not clamped.
inline IndexTable estimate_first_order(std::span<const EvaluationBlock> blocks) {
  return accumulate(blocks).first_order();
}

inline SensitivityIndices make_indices(const JansenSums& sums, bool biased) {
  auto total = sums.total();
  auto first = sums.first_order();
  return SensitivityIndices{std::move(first.values), std::move(total.values), sums.variance(),
                            std::move(total.defined), sums.count(), biased};
}

/// All three estimates in one pass. With `uniform_only`, blocks drawn from
/// adaptively transformed designs are excluded.
inline SensitivityIndices estimate_indices(std::span<const EvaluationBlock> blocks,
                                           bool uniform_only = false) {
  if (uniform_only) {
    std::vector<EvaluationBlock> uniform;
    for (const auto& b : blocks) {
      if (!b.adaptive) uniform.push_back(b);
    }
    return make_indices(accumulate(uniform), false);
  }
  const bool biased = std::any_of(blocks.begin(), blocks.end(),
                                  [](const EvaluationBlock& b) { return b.adaptive; });
  return make_indices(accumulate(blocks), biased);
}

}  // namespace sensa
