#include <gtest/gtest.h>

#include <chrono>
#include <string>

#include "sensa/external.hpp"

using namespace sensa;
using namespace std::chrono_literals;

namespace {

ExternalEvaluatorSpec echo(const std::string& flags = "", std::size_t pool = 1) {
  ExternalEvaluatorSpec spec;
  spec.command = std::string(SENSA_ECHO_EVALUATOR) + " " + flags;
  spec.inputs = 3;
  spec.outputs = 3;
  spec.pool_size = pool;
  spec.handshake_timeout = 5000ms;
  spec.evaluation_timeout = 2000ms;
  return spec;
}

std::vector<EvaluationRequest> requests(std::size_t count) {
  std::vector<EvaluationRequest> out;
  for (std::size_t k = 0; k < count; ++k) {
    const double v = static_cast<double>(k);
    out.push_back({k + 1, MatrixTag::A(), {v, v + 0.25, v + 0.5}});
  }
  return out;
}

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorKind::validation;
}

}  // namespace

TEST(External, EchoReturnsInputs) {
  ExternalEvaluator eval(echo());
  const auto reqs = requests(25);
  const auto ys = eval.evaluate(reqs);
  ASSERT_EQ(ys.size(), reqs.size());
  for (std::size_t k = 0; k < reqs.size(); ++k) EXPECT_EQ(ys[k], reqs[k].x);
}

TEST(External, OutOfOrderResponsesMatchedById) {
  ExternalEvaluator eval(echo("--reverse 4"));
  const auto reqs = requests(16);
  const auto ys = eval.evaluate(reqs);
  for (std::size_t k = 0; k < reqs.size(); ++k) EXPECT_EQ(ys[k], reqs[k].x);
}

TEST(External, PoolSpreadsRequests) {
  ExternalEvaluator eval(echo("", 4));
  const auto reqs = requests(1000);
  const auto ys = eval.evaluate(reqs);
  for (std::size_t k = 0; k < reqs.size(); ++k) EXPECT_EQ(ys[k], reqs[k].x);
}

TEST(External, RepeatedCallsAreDeterministic) {
  ExternalEvaluator eval(echo("", 2));
  const auto reqs = requests(50);
  EXPECT_EQ(eval.evaluate(reqs), eval.evaluate(reqs));
}

TEST(External, UnknownIdIsProtocolError) {
  ExternalEvaluator eval(echo("--unknown-on 3"));
  EXPECT_EQ(kind_of([&] { eval.evaluate(requests(5)); }), ErrorKind::protocol);
}

TEST(External, MalformedLineIsProtocolErrorWithRawLine) {
  ExternalEvaluator eval(echo("--malformed-on 2"));
  try {
    eval.evaluate(requests(5));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::protocol);
    EXPECT_NE(std::string(e.what()).find("malformed evaluator line"), std::string::npos);
  }
}

TEST(External, WrongOutputCountIsProtocolError) {
  ExternalEvaluator eval(echo("--outputs 2"));
  EXPECT_EQ(kind_of([&] { eval.evaluate(requests(3)); }), ErrorKind::protocol);
}

TEST(External, HangIsTimeoutNamingTheRequest) {
  auto spec = echo("--hang-on 4");
  spec.evaluation_timeout = 300ms;
  ExternalEvaluator eval(spec);
  const auto start = std::chrono::steady_clock::now();
  try {
    eval.evaluate(requests(6));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::evaluation_timeout);
    EXPECT_NE(std::string(e.what()).find("request id 4"), std::string::npos) << e.what();
  }
  EXPECT_LT(std::chrono::steady_clock::now() - start, 5s);
}

TEST(External, ChildExitIsCrash) {
  ExternalEvaluator eval(echo("--exit-on 2"));
  EXPECT_EQ(kind_of([&] { eval.evaluate(requests(5)); }), ErrorKind::evaluator_crashed);
}

TEST(External, RecoversAfterFailure) {
  ExternalEvaluator eval(echo("--exit-on 2"));
  EXPECT_THROW(eval.evaluate(requests(5)), Error);
  // Ids keep counting up, so the restarted child is past the fault.
  const auto reqs = requests(5);
  EXPECT_EQ(eval.evaluate(reqs)[4], reqs[4].x);
}

TEST(External, HandshakeFailures) {
  auto silent = echo("--no-ready");
  silent.handshake_timeout = 300ms;
  EXPECT_EQ(kind_of([&] { ExternalEvaluator eval(silent); }), ErrorKind::config);
  auto missing = echo();
  missing.command = "/nonexistent/evaluator-binary";
  EXPECT_EQ(kind_of([&] { ExternalEvaluator eval(missing); }), ErrorKind::config);
  auto empty = echo();
  empty.command.clear();
  EXPECT_EQ(kind_of([&] { ExternalEvaluator eval(empty); }), ErrorKind::config);
}

TEST(External, WrongRequestWidthIsRejected) {
  ExternalEvaluator eval(echo());
  std::vector<EvaluationRequest> bad{{1, MatrixTag::A(), {0.1}}};
  EXPECT_EQ(kind_of([&] { eval.evaluate(bad); }), ErrorKind::validation);
}
