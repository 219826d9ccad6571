#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "sensa/design.hpp"
#include "sensa/error.hpp"

namespace sensa {

/// Black-box target: maps each request's x to an output vector, results in
/// request order.
class Evaluator {
 public:
  virtual ~Evaluator() = default;
  virtual std::size_t inputs() const = 0;
  virtual std::size_t outputs() const = 0;
  virtual std::vector<std::vector<double>> evaluate(std::span<const EvaluationRequest> requests) = 0;
};

/// Wraps a pure function. Requests are split across `threads` workers.
class FunctionEvaluator final : public Evaluator {
 public:
  using Function = std::function<std::vector<double>(std::span<const double>)>;

  FunctionEvaluator(std::size_t inputs, std::size_t outputs, Function f, std::size_t threads = 1)
      : inputs_(inputs), outputs_(outputs), f_(std::move(f)), threads_(std::max<std::size_t>(1, threads)) {}

  std::size_t inputs() const override { return inputs_; }
  std::size_t outputs() const override { return outputs_; }

  std::vector<std::vector<double>> evaluate(std::span<const EvaluationRequest> requests) override {
    std::vector<std::vector<double>> out(requests.size());
    const auto run = [&](std::size_t begin, std::size_t end) {
      for (std::size_t r = begin; r < end; ++r) out[r] = f_(requests[r].x);
    };
    const std::size_t workers = std::min(threads_, requests.size());
    if (workers <= 1) {
      run(0, requests.size());
    } else {
      std::vector<std::exception_ptr> errors(workers);
      {
        std::vector<std::jthread> pool;
        const std::size_t chunk = (requests.size() + workers - 1) / workers;
        for (std::size_t w = 0; w < workers; ++w) {
          const std::size_t begin = w * chunk;
          const std::size_t end = std::min(requests.size(), begin + chunk);
          pool.emplace_back([&, w, begin, end] {
            try {
              run(begin, end);
            } catch (...) {
              errors[w] = std::current_exception();
            }
          });
        }
      }
      for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
      }
    }
    for (std::size_t r = 0; r < out.size(); ++r) {
      if (out[r].size() != outputs_) {
        throw Error(ErrorKind::evaluation, "request " + std::to_string(requests[r].row) + " " +
                                               requests[r].tag.str() + " returned " +
                                               std::to_string(out[r].size()) + " outputs");
      }
    }
    return out;
  }

 private:
  std::size_t inputs_;
  std::size_t outputs_;
  Function f_;
  std::size_t threads_;
};

}  // namespace sensa
