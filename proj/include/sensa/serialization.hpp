#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <iomanip>
#include <istream>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "sensa/campaign.hpp"
#include "sensa/error.hpp"
#include "sensa/external.hpp"
#include "sensa/models.hpp"

namespace sensa {

using nlohmann::json;

inline constexpr const char* kStateSchema = "sensa-state/1";

// --- densities and curves ------------------------------------------------------

inline json density_json(const PiecewiseConstantDensity& d, std::size_t dimension, double alpha, double epsilon) {
  return {{"dimension", dimension}, {"alpha", alpha}, {"epsilon", epsilon},
          {"breakpoints", d.breakpoints}, {"values", d.values}};
}

inline json curve_json(const CumulativeCurve& c) {
  return {{"breakpoints", c.breakpoints}, {"cumulative", c.cumulative}};
}

inline PiecewiseConstantDensity density_from_json(const json& j) {
  if (!j.is_object() || !j.contains("breakpoints") || !j.contains("values") || !j["breakpoints"].is_array() ||
      !j["values"].is_array()) {
    throw Error(ErrorKind::validation, "density needs 'breakpoints' and 'values' arrays");
  }
  PiecewiseConstantDensity d;
  for (const auto& v : j["breakpoints"]) {
    if (!v.is_number()) throw Error(ErrorKind::validation, "breakpoints must be numbers");
    d.breakpoints.push_back(v.get<double>());
  }
  for (const auto& v : j["values"]) {
    if (!v.is_number()) throw Error(ErrorKind::validation, "values must be numbers");
    d.values.push_back(v.get<double>());
  }
  d.validate();
  return d;
}

// --- configuration ---------------------------------------------------------------

inline json config_json(const CampaignConfig& c) {
  json ranges = json::array();
  for (const auto& r : c.ranges) ranges.push_back({r.lo, r.hi});
  json subset = json::array();
  for (auto j : c.output_subset) subset.push_back(j + 1);
  json evaluator = {{"model", c.evaluator.model}, {"threads", c.evaluator.threads}};
  if (c.evaluator.model == "external") {
    evaluator["command"] = c.evaluator.command;
    evaluator["handshake_timeout_ms"] = c.evaluator.handshake_timeout_ms;
    evaluator["evaluation_timeout_ms"] = c.evaluator.evaluation_timeout_ms;
    evaluator["pool"] = c.evaluator.pool_size;
  }
  json out = {{"inputs", c.inputs},   {"outputs", c.outputs}, {"batch_size", c.batch_size},
              {"alpha", c.alpha},     {"epsilon", c.epsilon}, {"ranges", ranges},
              {"evaluator", evaluator}, {"output_subset", subset}};
  out["max_batches"] = c.max_batches ? json(*c.max_batches) : json(nullptr);
  return out;
}

namespace detail {

template <typename T>
T field(const json& j, const char* name, const char* where) {
  if (!j.contains(name)) throw Error(ErrorKind::parse, std::string(where) + ": missing field '" + name + "'");
  try {
    return j.at(name).get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorKind::parse, std::string(where) + ": field '" + name + "' has the wrong type");
  }
}

template <typename T>
T field_or(const json& j, const char* name, T fallback, const char* where) {
  if (!j.contains(name) || j.at(name).is_null()) return fallback;
  return field<T>(j, name, where);
}

inline json parse_text(const std::string& text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::parse, std::string(what) + " is not valid JSON at byte " + std::to_string(e.byte) +
                                      " of " + std::to_string(text.size()));
  }
}

}  // namespace detail

inline CampaignConfig config_from_json(const json& j) {
  constexpr const char* where = "config";
  if (!j.is_object()) throw Error(ErrorKind::config, "config must be a JSON object");
  CampaignConfig c;
  try {
    c.inputs = detail::field_or<std::size_t>(j, "inputs", c.inputs, where);
    c.outputs = detail::field_or<std::size_t>(j, "outputs", c.outputs, where);
    c.batch_size = detail::field_or<std::size_t>(j, "batch_size", c.batch_size, where);
    c.alpha = detail::field_or<double>(j, "alpha", c.alpha, where);
    c.epsilon = detail::field_or<double>(j, "epsilon", c.epsilon, where);
    if (j.contains("ranges")) {
      for (const auto& r : j["ranges"]) {
        if (!r.is_array() || r.size() != 2) throw Error(ErrorKind::config, "each range must be [lo, hi]");
        c.ranges.push_back({r[0].get<double>(), r[1].get<double>()});
      }
    }
    if (j.contains("evaluator")) {
      const auto& e = j["evaluator"];
      c.evaluator.model = detail::field_or<std::string>(e, "model", "synthetic", "evaluator");
      c.evaluator.command = detail::field_or<std::string>(e, "command", "", "evaluator");
      if (!c.evaluator.command.empty() && !e.contains("model")) c.evaluator.model = "external";
      c.evaluator.handshake_timeout_ms = detail::field_or<std::int64_t>(e, "handshake_timeout_ms", 5000, "evaluator");
      c.evaluator.evaluation_timeout_ms = detail::field_or<std::int64_t>(e, "evaluation_timeout_ms", 30000, "evaluator");
      c.evaluator.pool_size = detail::field_or<std::size_t>(e, "pool", 1, "evaluator");
      c.evaluator.threads = detail::field_or<std::size_t>(e, "threads", 1, "evaluator");
    }
    if (j.contains("output_subset")) {
      for (const auto& v : j["output_subset"]) {
        const auto one_based = v.get<std::int64_t>();
        if (one_based < 1) throw Error(ErrorKind::config, "output_subset entries are 1-based");
        c.output_subset.push_back(static_cast<std::size_t>(one_based - 1));
      }
    }
    if (j.contains("max_batches") && !j["max_batches"].is_null()) c.max_batches = j["max_batches"].get<std::size_t>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::config, std::string("config field has the wrong type: ") + e.what());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::parse) throw Error(ErrorKind::config, e.what());
    throw;
  }
  c.validate();
  return c;
}

inline CampaignConfig load_config(const std::string& text) {
  try {
    return config_from_json(json::parse(text));
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::config, "config is not valid JSON at byte " + std::to_string(e.byte));
  }
}

/// Built-in models or an external process, validated against (m, n). For
/// external commands the handshake runs here, so a broken command fails fast.
inline std::unique_ptr<Evaluator> make_evaluator(const CampaignConfig& c) {
  const auto& e = c.evaluator;
  const auto need = [&](std::size_t m, std::size_t n) {
    if (c.inputs != m || c.outputs != n) {
      throw Error(ErrorKind::config, "model '" + e.model + "' needs inputs=" + std::to_string(m) +
                                         " outputs=" + std::to_string(n));
    }
  };
  if (e.model == "synthetic") {
    need(3, 3);
    auto params = SyntheticModelParams::reference();
    return std::make_unique<FunctionEvaluator>(
        3, 3, [params](std::span<const double> x) { return synthetic_final(x, params); }, e.threads);
  }
  if (e.model == "ishigami") {
    need(3, 1);
    return std::make_unique<FunctionEvaluator>(3, 1, [](std::span<const double> x) { return ishigami(x); }, e.threads);
  }
  if (e.model == "linear") {
    return std::make_unique<FunctionEvaluator>(
        c.inputs, c.outputs,
        [n = c.outputs](std::span<const double> x) { return std::vector<double>(n, x[0]); }, e.threads);
  }
  if (e.model == "external") {
    ExternalEvaluatorSpec spec{e.command, std::chrono::milliseconds(e.handshake_timeout_ms),
                               std::chrono::milliseconds(e.evaluation_timeout_ms), c.inputs, c.outputs, e.pool_size};
    return std::make_unique<ExternalEvaluator>(std::move(spec));
  }
  throw Error(ErrorKind::config, "unknown evaluator model '" + e.model + "'");
}

// --- state snapshots ---------------------------------------------------------------

inline json block_json(const EvaluationBlock& b) {
  json yab = json::array();
  for (std::size_t i = 0; i < b.yab.rows(); ++i) {
    const auto row = b.yab.row(i);
    yab.push_back(std::vector<double>(row.begin(), row.end()));
  }
  return {{"k", b.row}, {"batch", b.batch}, {"adaptive", b.adaptive}, {"xa", b.xa},
          {"xb", b.xb}, {"ya", b.ya},       {"yb", b.yb},             {"yab", yab}};
}

inline EvaluationBlock block_from_json(const json& j) {
  constexpr const char* where = "block";
  EvaluationBlock b;
  b.row = detail::field<std::uint64_t>(j, "k", where);
  b.batch = detail::field<std::int64_t>(j, "batch", where);
  b.adaptive = detail::field<bool>(j, "adaptive", where);
  b.xa = detail::field<std::vector<double>>(j, "xa", where);
  b.xb = detail::field<std::vector<double>>(j, "xb", where);
  b.ya = detail::field<std::vector<double>>(j, "ya", where);
  b.yb = detail::field<std::vector<double>>(j, "yb", where);
  const auto rows = detail::field<std::vector<std::vector<double>>>(j, "yab", where);
  b.yab = Matrix(rows.size(), b.ya.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != b.ya.size()) throw Error(ErrorKind::parse, "block " + std::to_string(b.row) + ": ragged yab");
    std::copy(rows[i].begin(), rows[i].end(), b.yab.row(i).begin());
  }
  return b;
}

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const auto t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return out.str();
}

inline std::string save_state(const Campaign& campaign) {
  const auto s = campaign.snapshot();
  json overrides = json::array();
  for (const auto& o : s.overrides) {
    overrides.push_back(o ? json{{"breakpoints", o->breakpoints}, {"values", o->values}} : json(nullptr));
  }
  json blocks = json::array();
  for (const auto& b : s.blocks) blocks.push_back(block_json(b));
  const json out = {{"schema", kStateSchema},
                    {"saved_at", utc_timestamp()},
                    {"config", config_json(s.config)},
                    {"version", s.version},
                    {"cursor", s.cursor},
                    {"status", to_string(s.status)},
                    {"alpha", s.alpha},
                    {"alpha_history", s.alpha_history},
                    {"batches_completed", s.batches_completed},
                    {"ingested_blocks", s.ingested_blocks},
                    {"next_row", s.next_row},
                    {"overrides", overrides},
                    {"blocks", blocks}};
  return out.dump();
}

inline Campaign load_state(const std::string& text) {
  const json j = detail::parse_text(text, "state file");
  constexpr const char* where = "state";
  if (!j.is_object()) throw Error(ErrorKind::parse, "state file must hold a JSON object");
  if (detail::field<std::string>(j, "schema", where) != kStateSchema) {
    throw Error(ErrorKind::parse, std::string("state schema is not ") + kStateSchema);
  }
  Campaign::Snapshot s;
  if (!j.contains("config")) throw Error(ErrorKind::parse, "state: missing field 'config'");
  try {
    s.config = config_from_json(j["config"]);
  } catch (const Error& e) {
    throw Error(ErrorKind::parse, std::string("state config: ") + e.what());
  }
  s.version = detail::field<std::uint64_t>(j, "version", where);
  s.cursor = detail::field<std::uint64_t>(j, "cursor", where);
  const auto status = parse_status(detail::field<std::string>(j, "status", where));
  if (!status) throw Error(ErrorKind::parse, "state: unknown status");
  s.status = *status == CampaignStatus::running ? CampaignStatus::idle : *status;
  s.alpha = detail::field<double>(j, "alpha", where);
  s.alpha_history = detail::field<std::vector<double>>(j, "alpha_history", where);
  s.batches_completed = detail::field<std::size_t>(j, "batches_completed", where);
  s.ingested_blocks = detail::field<std::size_t>(j, "ingested_blocks", where);
  s.next_row = detail::field<std::uint64_t>(j, "next_row", where);
  const auto overrides = detail::field<json>(j, "overrides", where);
  for (const auto& o : overrides) {
    if (o.is_null()) s.overrides.emplace_back(std::nullopt);
    else s.overrides.emplace_back(density_from_json(o));
  }
  for (const auto& b : detail::field<json>(j, "blocks", where)) {
    auto block = block_from_json(b);
    if (block.inputs() != s.config.inputs || block.outputs() != s.config.outputs || block.yab.rows() != s.config.inputs) {
      throw Error(ErrorKind::parse, "block " + std::to_string(block.row) + " does not match the config shape");
    }
    s.blocks.push_back(std::move(block));
  }
  return Campaign::restore(std::move(s));
}

// --- evaluation log (JSON Lines) -----------------------------------------------------

/// One line per request of the block, x in physical units.
inline std::vector<std::string> log_lines(const EvaluationBlock& b, const CampaignConfig& c) {
  const std::size_t m = b.inputs();
  std::vector<std::string> lines;
  lines.reserve(m + 2);
  const auto physical = [&](const Point& x) {
    Point out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = c.range(i).to_physical(x[i]);
    return out;
  };
  const auto emit = [&](const MatrixTag& tag, const Point& x, const std::vector<double>& y) {
    lines.push_back(json{{"k", b.row}, {"tag", tag.str()}, {"x", physical(x)}, {"y", y}, {"batch", b.batch}}.dump());
  };
  emit(MatrixTag::A(), b.xa, b.ya);
  emit(MatrixTag::B(), b.xb, b.yb);
  for (std::size_t i = 0; i < m; ++i) {
    const auto row = b.yab.row(i);
    emit(MatrixTag::AB(i), hybrid_point(b.xa, b.xb, i), std::vector<double>(row.begin(), row.end()));
  }
  return lines;
}

/// Group log records into blocks. Every row needs A, B and all AB:i records.
inline std::vector<EvaluationBlock> parse_log(std::istream& in, const CampaignConfig& c) {
  const std::size_t m = c.inputs;
  const std::size_t n = c.outputs;
  struct Partial {
    std::optional<Point> xa, xb;
    std::optional<std::vector<double>> ya, yb;
    std::vector<std::optional<std::vector<double>>> yab;
    std::int64_t batch = -1;
  };
  std::map<std::uint64_t, Partial> rows;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = "log line " + std::to_string(number);
    const auto rec = json::parse(line, nullptr, false);
    if (rec.is_discarded() || !rec.is_object()) throw Error(ErrorKind::ingest, where + ": not a JSON object");
    std::uint64_t k = 0;
    std::string tag_text;
    Point x;
    std::vector<double> y;
    try {
      k = rec.at("k").get<std::uint64_t>();
      tag_text = rec.at("tag").get<std::string>();
      x = rec.at("x").get<Point>();
      y = rec.at("y").get<std::vector<double>>();
    } catch (const json::exception&) {
      throw Error(ErrorKind::ingest, where + ": needs k, tag, x, y");
    }
    const auto tag = MatrixTag::parse(tag_text);
    if (!tag || (tag->kind == MatrixTag::Kind::hybrid && tag->column >= m)) {
      throw Error(ErrorKind::ingest, where + ": bad tag '" + tag_text + "'");
    }
    if (x.size() != m || y.size() != n) throw Error(ErrorKind::ingest, where + ": shape does not match (m, n)");
    for (std::size_t i = 0; i < m; ++i) x[i] = c.range(i).to_unit(x[i]);
    auto& p = rows[k];
    p.yab.resize(m);
    if (rec.contains("batch") && rec["batch"].is_number_integer()) p.batch = rec["batch"].get<std::int64_t>();
    const auto twice = [&] { throw Error(ErrorKind::ingest, where + ": duplicate record for row " + std::to_string(k) + " " + tag_text); };
    switch (tag->kind) {
      case MatrixTag::Kind::a:
        if (p.xa) twice();
        p.xa = x;
        p.ya = y;
        break;
      case MatrixTag::Kind::b:
        if (p.xb) twice();
        p.xb = x;
        p.yb = y;
        break;
      case MatrixTag::Kind::hybrid:
        if (p.yab[tag->column]) twice();
        p.yab[tag->column] = y;
        break;
    }
  }
  std::vector<EvaluationBlock> blocks;
  for (auto& [k, p] : rows) {
    const bool complete = p.xa && p.xb && std::all_of(p.yab.begin(), p.yab.end(), [](const auto& v) { return v.has_value(); });
    if (!complete) throw Error(ErrorKind::ingest, "row " + std::to_string(k) + " is missing A, B or AB records");
    EvaluationBlock b{k, -1, false, *p.xa, *p.xb, *p.ya, *p.yb, Matrix(m, n)};
    for (std::size_t i = 0; i < m; ++i) std::copy(p.yab[i]->begin(), p.yab[i]->end(), b.yab.row(i).begin());
    blocks.push_back(std::move(b));
  }
  return blocks;
}

// --- indices CSV ---------------------------------------------------------------------

/// Header `output,input,S,T,V,biased`, one row per (j, i), 1-based, 17 significant digits.
inline void write_indices_csv(std::ostream& out, const SensitivityIndices& ix) {
  out << "output,input,S,T,V,biased\n";
  out << std::setprecision(17);
  for (std::size_t j = 0; j < ix.variance.size(); ++j) {
    for (std::size_t i = 0; i < ix.total.rows(); ++i) {
      out << j + 1 << ',' << i + 1 << ',' << ix.first_order(i, j) << ',' << ix.total(i, j) << ','
          << ix.variance[j] << ',' << (ix.biased ? "true" : "false") << '\n';
    }
  }
}

struct IndexRow {
  std::size_t output = 0;
  std::size_t input = 0;
  double first_order = 0.0;
  double total = 0.0;
  double variance = 0.0;
  bool biased = false;
};

inline std::vector<IndexRow> read_indices_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "output,input,S,T,V,biased") {
    throw Error(ErrorKind::parse, "indices CSV header mismatch");
  }
  std::vector<IndexRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string cell[6];
    for (auto& c : cell) std::getline(fields, c, ',');
    try {
      rows.push_back({std::stoul(cell[0]), std::stoul(cell[1]), std::stod(cell[2]), std::stod(cell[3]),
                      std::stod(cell[4]), cell[5] == "true"});
    } catch (const std::exception&) {
      throw Error(ErrorKind::parse, "bad indices CSV row: " + line);
    }
  }
  return rows;
}

}  // namespace sensa
