#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "sensa/error.hpp"
#include "sensa/sobol_directions.hpp"

namespace sensa {

using Point = std::vector<double>;

/// Unscrambled Sobol' sequence in Gray-code order with Joe-Kuo direction
/// numbers. The leading all-zero point is never emitted, so the first point
/// is (0.5, ..., 0.5).
class SobolStream {
 public:
  static constexpr std::size_t kBits = 32;
  static constexpr std::size_t max_dimension() { return detail::kSobolMaxDimension; }

  explicit SobolStream(std::size_t dimension) : dimension_(dimension) {
    if (dimension == 0 || dimension > max_dimension()) {
      throw Error(ErrorKind::unsupported_dimension,
                  "Sobol' dimension " + std::to_string(dimension) + " not in [1, " +
                      std::to_string(max_dimension()) + "]");
    }
    directions_.resize(dimension * kBits);
    for (std::size_t b = 0; b < kBits; ++b) {
      directions_[b] = std::uint32_t{1} << (kBits - 1 - b);
    }
    for (std::size_t d = 1; d < dimension; ++d) {
      const auto& poly = detail::kSobolPolynomials[d - 1];
      const std::size_t s = poly.degree;
      std::uint32_t* v = &directions_[d * kBits];
      for (std::size_t b = 0; b < s && b < kBits; ++b) {
        v[b] = poly.initial[b] << (kBits - 1 - b);
      }
      for (std::size_t b = s; b < kBits; ++b) {
        std::uint32_t value = v[b - s] ^ (v[b - s] >> s);
        for (std::size_t k = 1; k < s; ++k) {
          if ((poly.coefficients >> (s - 1 - k)) & 1u) value ^= v[b - k];
        }
        v[b] = value;
      }
    }
    state_.assign(dimension, 0);
  }

  std::size_t dimension() const noexcept { return dimension_; }

  /// Number of points emitted (or skipped) so far.
  std::uint64_t index() const noexcept { return index_; }

  std::vector<Point> next(std::size_t count) {
    std::vector<Point> points;
    points.reserve(count);
    for (std::size_t c = 0; c < count; ++c) {
      advance_one();
      Point p(dimension_);
      for (std::size_t d = 0; d < dimension_; ++d) p[d] = to_unit(state_[d]);
      points.push_back(std::move(p));
    }
    return points;
  }

  /// Advance as if `count` points were emitted and discarded.
  void skip(std::uint64_t count) {
    if (count == 0) return;
    seek(index_ + count);
  }

  /// Position the cursor so the next emitted point is point number `index + 1`.
  void seek(std::uint64_t index) {
    if (index > kMaxIndex) {
      throw Error(ErrorKind::validation, "Sobol' index exceeds 2^32 - 1");
    }
    const std::uint64_t gray = index ^ (index >> 1);
    for (std::size_t d = 0; d < dimension_; ++d) {
      std::uint32_t x = 0;
      for (std::size_t b = 0; b < kBits; ++b) {
        if ((gray >> b) & 1u) x ^= directions_[d * kBits + b];
      }
      state_[d] = x;
    }
    index_ = index;
  }

  friend bool operator==(const SobolStream& a, const SobolStream& b) {
    return a.dimension_ == b.dimension_ && a.index_ == b.index_;
  }

 private:
  static constexpr std::uint64_t kMaxIndex = std::numeric_limits<std::uint32_t>::max();

  static double to_unit(std::uint32_t x) { return static_cast<double>(x) * 0x1p-32; }

  void advance_one() {
    if (index_ >= kMaxIndex) {
      throw Error(ErrorKind::validation, "Sobol' stream exhausted");
    }
    // Rightmost zero bit of the current index selects the direction number.
    std::size_t c = 0;
    for (std::uint64_t value = index_; value & 1u; value >>= 1) ++c;
    for (std::size_t d = 0; d < dimension_; ++d) state_[d] ^= directions_[d * kBits + c];
    ++index_;
  }

  std::size_t dimension_;
  std::uint64_t index_ = 0;
  std::vector<std::uint32_t> directions_;
  std::vector<std::uint32_t> state_;
};

}  // namespace sensa
