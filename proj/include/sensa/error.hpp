#pragma once

#include <stdexcept>
#include <string>

namespace sensa {

enum class ErrorKind {
  unsupported_dimension,
  malformed_point,
  index_out_of_range,
  insufficient_data,
  degenerate_density,
  validation,
  config,
  concurrent_run,
  ingest,
  parse,
  evaluation,
  evaluation_timeout,
  protocol,
  evaluator_crashed,
  divergence,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::unsupported_dimension: return "unsupported dimension";
    case ErrorKind::malformed_point: return "malformed point";
    case ErrorKind::index_out_of_range: return "index out of range";
    case ErrorKind::insufficient_data: return "insufficient data";
    case ErrorKind::degenerate_density: return "degenerate density";
    case ErrorKind::validation: return "validation error";
    case ErrorKind::config: return "config error";
    case ErrorKind::concurrent_run: return "concurrent run";
    case ErrorKind::ingest: return "ingest error";
    case ErrorKind::parse: return "parse error";
    case ErrorKind::evaluation: return "evaluation error";
    case ErrorKind::evaluation_timeout: return "evaluation timeout";
    case ErrorKind::protocol: return "protocol error";
    case ErrorKind::evaluator_crashed: return "evaluator crashed";
    case ErrorKind::divergence: return "divergence";
  }
  return "error";
}

/// Every failure raised by the library carries a kind so callers (CLI exit
/// paths, HTTP handlers) can map it without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace sensa
