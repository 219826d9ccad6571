#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sensa/error.hpp"
#include "sensa/regional.hpp"
#include "sensa/sobol.hpp"

namespace sensa {

/// One row of the side-by-side A|B design.
struct DesignRow {
  Point a;
  Point b;
  std::int64_t batch = 0;
  std::uint64_t row = 0;  // global, 1-based

  friend bool operator==(const DesignRow&, const DesignRow&) = default;
};

/// Which design matrix a request belongs to. `hybrid` is A with column
/// `column` (0-based) taken from B.
struct MatrixTag {
  enum class Kind { a, b, hybrid };
  Kind kind = Kind::a;
  std::size_t column = 0;

  static MatrixTag A() { return {Kind::a, 0}; }
  static MatrixTag B() { return {Kind::b, 0}; }
  static MatrixTag AB(std::size_t column) { return {Kind::hybrid, column}; }

  /// "A", "B" or "AB:i" with a 1-based i.
  std::string str() const {
    switch (kind) {
      case Kind::a: return "A";
      case Kind::b: return "B";
      case Kind::hybrid: return "AB:" + std::to_string(column + 1);
    }
    return "?";
  }

  static std::optional<MatrixTag> parse(const std::string& text) {
    if (text == "A") return A();
    if (text == "B") return B();
    if (text.size() > 3 && text.compare(0, 3, "AB:") == 0) {
      std::size_t column = 0;
      for (std::size_t p = 3; p < text.size(); ++p) {
        if (text[p] < '0' || text[p] > '9') return std::nullopt;
        column = column * 10 + static_cast<std::size_t>(text[p] - '0');
        if (column > 1'000'000) return std::nullopt;
      }
      if (column == 0) return std::nullopt;
      return AB(column - 1);
    }
    return std::nullopt;
  }

  friend bool operator==(const MatrixTag&, const MatrixTag&) = default;
};

struct EvaluationRequest {
  std::uint64_t row = 0;
  MatrixTag tag;
  Point x;
};

/// Split 2m-dimensional points into A (first m coordinates) and B (last m).
inline std::vector<DesignRow> build_design_rows(std::span<const Point> points, std::size_t inputs,
                                                std::uint64_t first_row = 1, std::int64_t batch = 0) {
  std::vector<DesignRow> rows;
  rows.reserve(points.size());
  for (std::size_t k = 0; k < points.size(); ++k) {
    const auto& p = points[k];
    if (p.size() != 2 * inputs) {
      throw Error(ErrorKind::malformed_point, "expected " + std::to_string(2 * inputs) +
                                                  " coordinates, got " + std::to_string(p.size()));
    }
    rows.push_back({Point(p.begin(), p.begin() + static_cast<std::ptrdiff_t>(inputs)),
                    Point(p.begin() + static_cast<std::ptrdiff_t>(inputs), p.end()), batch,
                    first_row + k});
  }
  return rows;
}

/// `a` with coordinate i (0-based) replaced by b's.
inline Point hybrid_point(std::span<const double> a, std::span<const double> b, std::size_t i) {
  if (a.size() != b.size()) throw Error(ErrorKind::malformed_point, "a and b differ in dimension");
  if (i >= a.size()) {
    throw Error(ErrorKind::index_out_of_range,
                "column " + std::to_string(i + 1) + " outside 1.." + std::to_string(a.size()));
  }
  Point x(a.begin(), a.end());
  x[i] = b[i];
  return x;
}

/// Requests in canonical order: per row A, B, AB(1)..AB(m).
inline std::vector<EvaluationRequest> evaluation_plan(std::span<const DesignRow> rows) {
  std::vector<EvaluationRequest> plan;
  if (rows.empty()) return plan;
  plan.reserve(rows.size() * (rows.front().a.size() + 2));
  for (const auto& r : rows) {
    plan.push_back({r.row, MatrixTag::A(), r.a});
    plan.push_back({r.row, MatrixTag::B(), r.b});
    for (std::size_t i = 0; i < r.a.size(); ++i) {
      plan.push_back({r.row, MatrixTag::AB(i), hybrid_point(r.a, r.b, i)});
    }
  }
  return plan;
}

/// Map coordinate l of each 2m-point through the inverse of curve (l mod m).
inline std::vector<Point> transform_points(std::span<const Point> points,
                                           std::span<const CumulativeCurve> curves) {
  const std::size_t m = curves.size();
  std::vector<Point> out;
  out.reserve(points.size());
  for (const auto& p : points) {
    if (p.size() != 2 * m) {
      throw Error(ErrorKind::malformed_point, "expected " + std::to_string(2 * m) + " coordinates");
    }
    Point q(p.size());
    for (std::size_t l = 0; l < p.size(); ++l) q[l] = inverse_cdf(curves[l % m], p[l]);
    out.push_back(std::move(q));
  }
  return out;
}

/// Affine map between the unit interval and a physical input range.
struct InputRange {
  double lo = 0.0;
  double hi = 1.0;

  double to_physical(double u) const { return lo + u * (hi - lo); }
  double to_unit(double x) const { return (x - lo) / (hi - lo); }

  friend bool operator==(const InputRange&, const InputRange&) = default;
};

}  // namespace sensa
