#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "httplib.h"
#include "sensa/service.hpp"

using namespace sensa;

namespace {

class ServiceTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = std::filesystem::temp_directory_path() /
           ("sensa-service-" + std::to_string(::getpid()) + "-" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    std::filesystem::create_directories(dir_);
    CampaignConfig cfg;
    cfg.batch_size = 8;
    service_ = std::make_unique<CampaignService>(Campaign(cfg), make_evaluator(cfg),
                                                 CampaignFiles::beside((dir_ / "state.json").string()));
    port_ = service_->start();
    client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
  }

  void TearDown() override {
    client_.reset();
    service_.reset();
    std::filesystem::remove_all(dir_);
  }

  json get(const std::string& path, int expected = 200) {
    auto res = client_->Get(path);
    EXPECT_TRUE(res);
    if (!res) return {};
    EXPECT_EQ(res->status, expected) << path << ": " << res->body;
    return json::parse(res->body);
  }

  json post(const std::string& path, const std::string& body, int expected = 200) {
    auto res = client_->Post(path, body, "application/json");
    EXPECT_TRUE(res);
    if (!res) return {};
    EXPECT_EQ(res->status, expected) << path << ": " << res->body;
    return json::parse(res->body);
  }

  void run(int batches) {
    post("/api/control/run", json{{"batches", batches}}.dump());
    service_->wait_idle();
  }

  std::filesystem::path dir_;
  std::unique_ptr<CampaignService> service_;
  std::unique_ptr<httplib::Client> client_;
  int port_ = 0;
};

}  // namespace

TEST_F(ServiceTest, FreshState) {
  const auto state = get("/api/state");
  EXPECT_EQ(state["version"], 1);
  EXPECT_EQ(state["status"], "idle");
  EXPECT_EQ(state["batches_completed"], 0);
  EXPECT_EQ(state["total_evaluations"], 0);
  EXPECT_EQ(state["alpha"], 2.0);
  EXPECT_TRUE(state["indices"].is_null());
  const auto err = get("/api/density/1", 409);
  EXPECT_TRUE(err.contains("error"));
  const auto uniform = get("/api/density/1?support=sampling");
  EXPECT_EQ(uniform["values"], json::array({1.0}));
}

TEST_F(ServiceTest, AlphaThenRun) {
  const auto ack = post("/api/control/alpha", R"({"value": 0})");
  EXPECT_EQ(ack["accepted"], true);
  EXPECT_EQ(ack["queue_position"], 0);
  run(2);
  const auto state = get("/api/state");
  EXPECT_EQ(state["batches_completed"], 2);
  EXPECT_EQ(state["total_evaluations"], 80);
  EXPECT_EQ(state["alpha_history"], json::array({0.0, 0.0}));
  EXPECT_EQ(state["indices"]["S"].size(), 3u);
  EXPECT_TRUE(state["last_error"].is_null());

  const auto density = get("/api/density/1");
  EXPECT_EQ(density["dimension"], 1);
  EXPECT_EQ(density["alpha"], 0.0);
  const auto& v = density["values"];
  const auto& bp = density["breakpoints"];
  double mass = 0;
  for (std::size_t k = 0; k < v.size(); ++k) mass += v[k].get<double>() * (bp[k + 1].get<double>() - bp[k].get<double>());
  EXPECT_NEAR(mass, 1.0, 1e-12);

  const auto curve = get("/api/cumulative/1?output=2");
  EXPECT_EQ(curve["output"], 2);
  EXPECT_FALSE(curve["cumulative"].empty());

  const auto samples = get("/api/samples?dims=1,3&limit=5");
  EXPECT_EQ(samples["points"].size(), 10u);
  EXPECT_EQ(samples["dims"], json::array({1, 3}));

  std::ifstream log(dir_ / "state.json.log.jsonl");
  std::size_t lines = 0;
  for (std::string line; std::getline(log, line);) ++lines;
  EXPECT_EQ(lines, 80u);
  EXPECT_TRUE(std::filesystem::exists(dir_ / "state.json"));
}

TEST_F(ServiceTest, OverrideValidation) {
  auto err = post("/api/control/override", R"({"dim": 1, "breakpoints": [0, 0.5, 1], "values": [1, -2]})", 400);
  EXPECT_EQ(err["field"], "values");
  err = post("/api/control/override", R"({"dim": 9, "breakpoints": [0, 1], "values": [1]})", 400);
  EXPECT_EQ(err["field"], "dim");
  err = post("/api/control/override", R"({"breakpoints": [0, 1], "values": [1]})", 400);
  EXPECT_EQ(err["field"], "dim");
  post("/api/control/alpha", R"({"value": "high"})", 400);
  post("/api/control/alpha", "not json", 400);
  post("/api/control/run", R"({"batches": -1})", 400);
  get("/api/density/0", 404);
  get("/api/density/7?support=sampling", 404);
  get("/api/density/1?support=weird", 400);

  const auto ack = post("/api/control/override", R"({"dim": 2, "breakpoints": [0.5, 1], "values": [1]})");
  EXPECT_EQ(ack["accepted"], true);
  const auto density = get("/api/density/2?support=sampling");
  EXPECT_EQ(density["breakpoints"], json::array({0.5, 1.0}));
  EXPECT_EQ(density["values"], json::array({2.0}));
  run(1);
  for (const auto& p : get("/api/samples?dims=2")["points"]) EXPECT_GE(p["x"][0].get<double>(), 0.5);
  auto res = client_->Delete("/api/control/override/2");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
}

TEST_F(ServiceTest, VersionIsMonotone) {
  std::int64_t last = get("/api/state")["version"];
  const auto bump = [&](const json& body) {
    EXPECT_GT(body["version"].get<std::int64_t>(), last);
    last = body["version"];
  };
  bump(post("/api/control/alpha", R"({"value": 1.5})"));
  bump(post("/api/control/pause", "{}"));
  bump(post("/api/control/resume", "{}"));
  run(1);
  bump(get("/api/state"));
  bump(post("/api/control/override", R"({"dim": 1, "breakpoints": [0, 1], "values": [1]})"));
}

TEST_F(ServiceTest, PauseHoldsRequestedBatches) {
  post("/api/control/pause", "{}");
  post("/api/control/run", R"({"batches": 2})");
  service_->wait_idle();
  auto state = get("/api/state");
  EXPECT_EQ(state["status"], "paused");
  EXPECT_EQ(state["batches_completed"], 0);
  EXPECT_EQ(state["requested_batches"], 2);
  post("/api/control/resume", "{}");
  service_->wait_idle();
  state = get("/api/state");
  EXPECT_EQ(state["batches_completed"], 2);
  EXPECT_EQ(state["requested_batches"], 0);
}

TEST_F(ServiceTest, IngestLog) {
  CampaignConfig cfg;
  cfg.batch_size = 4;
  Campaign other(cfg);
  auto eval = make_evaluator(cfg);
  std::string body;
  for (const auto& b : other.run_batch(*eval)) {
    for (const auto& line : log_lines(b, cfg)) body += line + "\n";
  }
  const auto ack = post("/api/ingest", body);
  EXPECT_EQ(ack["blocks"], 4);
  const auto state = get("/api/state");
  EXPECT_EQ(state["ingested_blocks"], 4);
  EXPECT_EQ(state["total_evaluations"], 20);
  post("/api/ingest", body, 400);
  post("/api/ingest", "garbage\n", 400);
}
