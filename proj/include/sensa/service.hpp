#pragma once

#include <atomic>
#include <condition_variable>
#include <cstddef>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "httplib.h"
#include "json.hpp"
#include "sensa/campaign.hpp"
#include "sensa/serialization.hpp"

namespace sensa {

/// Where a campaign persists: the state snapshot and its append-only log.
struct CampaignFiles {
  std::string state;
  std::string log;

  static CampaignFiles beside(const std::string& state_path) { return {state_path, state_path + ".log.jsonl"}; }

  void save(const Campaign& c) const {
    if (state.empty()) return;
    const std::string tmp = state + ".tmp";
    {
      std::ofstream out(tmp, std::ios::trunc);
      out << save_state(c);
      if (!out) throw Error(ErrorKind::validation, "cannot write " + tmp);
    }
    std::rename(tmp.c_str(), state.c_str());
  }

  void append(const std::vector<EvaluationBlock>& blocks, const CampaignConfig& config) const {
    if (log.empty() || blocks.empty()) return;
    std::ofstream out(log, std::ios::app);
    for (const auto& b : blocks) {
      for (const auto& line : log_lines(b, config)) out << line << '\n';
    }
  }
};

/// JSON summary of a campaign as served at GET /api/state.
inline json state_summary(const Campaign& c, const std::string& last_error = {}, std::size_t requested = 0) {
  json out = {{"version", c.version()},
              {"status", to_string(c.status())},
              {"batches_completed", c.batches_completed()},
              {"ingested_blocks", c.ingested_blocks()},
              {"total_evaluations", c.evaluation_count()},
              {"alpha", c.alpha()},
              {"alpha_history", c.alpha_history()},
              {"pending_commands", c.pending_commands()},
              {"requested_batches", requested},
              {"inputs", c.config().inputs},
              {"outputs", c.config().outputs}};
  if (const auto ix = c.indices()) {
    json s = json::array();
    json t = json::array();
    for (std::size_t j = 0; j < ix->variance.size(); ++j) {
      json srow = json::array();
      json trow = json::array();
      for (std::size_t i = 0; i < ix->total.rows(); ++i) {
        srow.push_back(ix->defined[j] ? json(ix->first_order(i, j)) : json(nullptr));
        trow.push_back(ix->defined[j] ? json(ix->total(i, j)) : json(nullptr));
      }
      s.push_back(srow);
      t.push_back(trow);
    }
    out["variance"] = ix->variance;
    out["indices"] = {{"S", s}, {"T", t}, {"biased", ix->biased}, {"samples", ix->samples}};
  } else {
    out["variance"] = nullptr;
    out["indices"] = nullptr;
  }
  out["last_error"] = last_error.empty() ? json(nullptr) : json(last_error);
  return out;
}

/// HTTP API around one campaign. Handlers read under a mutex; a single worker
/// thread runs batches, evaluating outside the lock so readers and steering
/// calls are never blocked by a model evaluation.
class CampaignService {
 public:
  CampaignService(Campaign campaign, std::unique_ptr<Evaluator> evaluator, CampaignFiles files = {})
      : campaign_(std::move(campaign)), evaluator_(std::move(evaluator)), files_(std::move(files)) {
    routes();
    worker_ = std::thread([this] { work(); });
  }

  CampaignService(const CampaignService&) = delete;
  CampaignService& operator=(const CampaignService&) = delete;

  ~CampaignService() {
    stop();
    {
      std::lock_guard lock(mutex_);
      quit_ = true;
    }
    wake_.notify_all();
    if (worker_.joinable()) worker_.join();
  }

  /// Bind and serve on a background thread; returns the bound port.
  int start(const std::string& host = "127.0.0.1", int port = 0) {
    const int bound = port == 0 ? server_.bind_to_any_port(host) : (server_.bind_to_port(host, port) ? port : -1);
    if (bound < 0) throw Error(ErrorKind::config, "cannot bind " + host + ":" + std::to_string(port));
    listener_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
    return bound;
  }

  /// Serve on the calling thread until stop().
  bool listen(const std::string& host, int port) { return server_.listen(host, port); }

  void stop() {
    server_.stop();
    if (listener_.joinable()) listener_.join();
  }

  /// Block until no batches are requested or running.
  void wait_idle() {
    std::unique_lock lock(mutex_);
    idle_.wait(lock, [this] { return !busy_ && (requested_ == 0 || halted()); });
  }

  json summary() const {
    std::lock_guard lock(mutex_);
    return state_summary(campaign_, last_error_, requested_);
  }

  Campaign snapshot() const {
    std::lock_guard lock(mutex_);
    return campaign_;
  }

 private:
  bool halted() const {
    return campaign_.status() == CampaignStatus::paused || campaign_.status() == CampaignStatus::done;
  }

  void work() {
    std::unique_lock lock(mutex_);
    for (;;) {
      wake_.wait(lock, [this] { return quit_ || (requested_ > 0 && !halted()); });
      if (quit_) return;
      busy_ = true;
      std::string error;
      try {
        auto plan = campaign_.prepare_batch();
        const auto requests = campaign_.physical_requests(plan);
        lock.unlock();
        std::vector<std::vector<double>> outputs;
        try {
          outputs = evaluator_->evaluate(requests);
        } catch (const std::exception& e) {
          error = e.what();
        }
        lock.lock();
        if (!error.empty()) {
          campaign_.abort_batch();
          files_.save(campaign_);
        } else {
          const auto fresh = campaign_.commit_batch(plan, outputs);
          files_.append(fresh, campaign_.config());
          files_.save(campaign_);
          --requested_;
        }
      } catch (const std::exception& e) {
        if (!lock.owns_lock()) lock.lock();
        error = e.what();
      }
      if (!error.empty()) {
        last_error_ = error;
        requested_ = 0;
      }
      busy_ = false;
      idle_.notify_all();
    }
  }

  json ack(std::size_t position) const {
    return {{"accepted", true}, {"queue_position", position}, {"version", campaign_.version()}};
  }

  static void send(httplib::Response& res, const json& body, int status = 200) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  static void fail(httplib::Response& res, int status, const std::string& message, const std::string& field = {}) {
    json body = {{"error", message}};
    if (!field.empty()) body["field"] = field;
    send(res, body, status);
  }

  static int status_for(const Error& e) {
    switch (e.kind()) {
      case ErrorKind::insufficient_data:
      case ErrorKind::degenerate_density:
      case ErrorKind::concurrent_run:
        return 409;
      case ErrorKind::index_out_of_range:
        return 404;
      default:
        return 400;
    }
  }

  template <typename Handler>
  auto guarded(Handler handler) {
    return [handler](const httplib::Request& req, httplib::Response& res) {
      try {
        handler(req, res);
      } catch (const Error& e) {
        fail(res, status_for(e), e.what());
      } catch (const json::exception& e) {
        fail(res, 400, std::string("malformed body: ") + e.what());
      } catch (const std::logic_error& e) {
        fail(res, 400, std::string("malformed parameter: ") + e.what());
      } catch (const std::exception& e) {
        fail(res, 500, e.what());
      }
    };
  }

  static json body_object(const httplib::Request& req) {
    const auto body = json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.is_object()) throw Error(ErrorKind::validation, "body must be a JSON object");
    return body;
  }

  static std::size_t dimension_param(const httplib::Request& req) {
    const auto text = req.matches[1].str();
    const auto i = std::stoul(text);
    if (i == 0) throw Error(ErrorKind::index_out_of_range, "dimensions are 1-based");
    return i - 1;
  }

  static std::optional<std::size_t> output_param(const httplib::Request& req) {
    if (!req.has_param("output")) return std::nullopt;
    const auto j = std::stoul(req.get_param_value("output"));
    if (j == 0) throw Error(ErrorKind::index_out_of_range, "outputs are 1-based");
    return j - 1;
  }

  static bool sampling_param(const httplib::Request& req) {
    if (!req.has_param("support")) return false;
    const auto v = req.get_param_value("support");
    if (v == "sampling") return true;
    if (v == "observed") return false;
    throw Error(ErrorKind::validation, "support must be 'observed' or 'sampling'");
  }

  void routes() {
    server_.Get("/api/state", guarded([this](const httplib::Request&, httplib::Response& res) {
      send(res, summary());
    }));

    server_.Get(R"(/api/density/(\d+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto i = dimension_param(req);
      const auto j = output_param(req);
      std::lock_guard lock(mutex_);
      const auto& c = campaign_;
      const auto density = sampling_param(req) ? c.sampling_density(i) : c.density(i, j);
      auto body = density_json(density, i + 1, c.alpha(), c.config().epsilon);
      body["version"] = c.version();
      if (j) body["output"] = *j + 1;
      send(res, body);
    }));

    server_.Get(R"(/api/cumulative/(\d+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto i = dimension_param(req);
      const auto j = output_param(req);
      std::lock_guard lock(mutex_);
      const auto& c = campaign_;
      json body;
      if (j) {
        const auto curve = c.cumulative(i, *j);
        if (!curve) throw Error(ErrorKind::insufficient_data, "zero variance for output " + std::to_string(*j + 1));
        body = curve_json(*curve);
        body["output"] = *j + 1;
      } else if (sampling_param(req)) {
        body = curve_json(c.sampling_curves().at(i));
      } else {
        body = curve_json(cumulative_density(c.density(i)));
      }
      body["dimension"] = i + 1;
      body["version"] = c.version();
      send(res, body);
    }));

    server_.Get("/api/samples", guarded([this](const httplib::Request& req, httplib::Response& res) {
      std::vector<std::size_t> dims;
      std::istringstream list(req.has_param("dims") ? req.get_param_value("dims") : "1,2");
      for (std::string item; std::getline(list, item, ',');) {
        const auto d = std::stoul(item);
        if (d == 0) throw Error(ErrorKind::index_out_of_range, "dimensions are 1-based");
        dims.push_back(d - 1);
      }
      const std::size_t limit = req.has_param("limit") ? std::stoul(req.get_param_value("limit")) : 1000;
      std::lock_guard lock(mutex_);
      for (auto d : dims) {
        if (d >= campaign_.config().inputs) throw Error(ErrorKind::index_out_of_range, "dimension " + std::to_string(d + 1));
      }
      const auto& blocks = campaign_.blocks();
      json points = json::array();
      const std::size_t first = blocks.size() > limit ? blocks.size() - limit : 0;
      for (std::size_t k = first; k < blocks.size(); ++k) {
        for (const auto* x : {&blocks[k].xa, &blocks[k].xb}) {
          json p = json::array();
          for (auto d : dims) p.push_back((*x)[d]);
          points.push_back({{"k", blocks[k].row}, {"batch", blocks[k].batch}, {"x", p}});
        }
      }
      json dims_out = json::array();
      for (auto d : dims) dims_out.push_back(d + 1);
      send(res, {{"dims", dims_out}, {"points", points}, {"version", campaign_.version()}});
    }));

    server_.Post("/api/control/alpha", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto body = body_object(req);
      if (!body.contains("value") || !body["value"].is_number()) {
        return fail(res, 400, "'value' must be a number", "value");
      }
      std::lock_guard lock(mutex_);
      const auto position = campaign_.set_alpha(body["value"].get<double>());
      persist();
      send(res, ack(position));
    }));

    server_.Post("/api/control/run", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto body = body_object(req);
      if (!body.contains("batches") || !body["batches"].is_number_integer() || body["batches"].get<std::int64_t>() < 0) {
        return fail(res, 400, "'batches' must be a nonnegative integer", "batches");
      }
      {
        std::lock_guard lock(mutex_);
        requested_ += body["batches"].get<std::size_t>();
        last_error_.clear();
        send(res, {{"accepted", true}, {"requested_batches", requested_}, {"version", campaign_.version()}});
      }
      wake_.notify_all();
    }));

    server_.Post("/api/control/pause", guarded([this](const httplib::Request&, httplib::Response& res) {
      std::lock_guard lock(mutex_);
      const auto position = campaign_.pause();
      persist();
      send(res, ack(position));
    }));

    server_.Post("/api/control/resume", guarded([this](const httplib::Request&, httplib::Response& res) {
      {
        std::lock_guard lock(mutex_);
        const auto position = campaign_.resume();
        persist();
        send(res, ack(position));
      }
      wake_.notify_all();
    }));

    server_.Post("/api/control/override", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto body = body_object(req);
      if (!body.contains("dim") || !body["dim"].is_number_integer() || body["dim"].get<std::int64_t>() < 1) {
        return fail(res, 400, "'dim' must be a 1-based integer", "dim");
      }
      PiecewiseConstantDensity density;
      try {
        density = density_from_json(body);
      } catch (const Error& e) {
        return fail(res, 400, e.what(), "values");
      }
      std::lock_guard lock(mutex_);
      const auto dim = body["dim"].get<std::size_t>() - 1;
      if (dim >= campaign_.config().inputs) return fail(res, 400, "dimension out of range", "dim");
      std::size_t position = 0;
      try {
        position = campaign_.override_density(dim, std::move(density));
      } catch (const Error& e) {
        return fail(res, 400, e.what(), "values");
      }
      persist();
      send(res, ack(position));
    }));

    server_.Delete(R"(/api/control/override/(\d+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto i = dimension_param(req);
      std::lock_guard lock(mutex_);
      const auto position = campaign_.clear_override(i);
      persist();
      send(res, ack(position));
    }));

    server_.Post("/api/ingest", guarded([this](const httplib::Request& req, httplib::Response& res) {
      std::lock_guard lock(mutex_);
      std::istringstream in(req.body);
      auto blocks = parse_log(in, campaign_.config());
      const auto count = blocks.size();
      const auto position = campaign_.ingest_external(blocks);
      files_.append(blocks, campaign_.config());
      persist();
      auto body = ack(position);
      body["blocks"] = count;
      send(res, body);
    }));
  }

  void persist() {
    if (campaign_.status() != CampaignStatus::running) files_.save(campaign_);
  }

  mutable std::mutex mutex_;
  std::condition_variable wake_;
  std::condition_variable idle_;
  Campaign campaign_;
  std::unique_ptr<Evaluator> evaluator_;
  CampaignFiles files_;
  httplib::Server server_;
  std::thread worker_;
  std::thread listener_;
  std::size_t requested_ = 0;
  bool busy_ = false;
  bool quit_ = false;
  std::string last_error_;
};

}  // namespace sensa
