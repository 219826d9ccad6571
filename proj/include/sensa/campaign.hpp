#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "sensa/design.hpp"
#include "sensa/error.hpp"
#include "sensa/estimators.hpp"
#include "sensa/evaluator.hpp"
#include "sensa/regional.hpp"
#include "sensa/sobol.hpp"

namespace sensa {

/// Where model evaluations come from: a built-in model or an external command.
struct EvaluatorConfig {
  std::string model = "synthetic";  // synthetic | ishigami | linear | external
  std::string command;
  std::int64_t handshake_timeout_ms = 5000;
  std::int64_t evaluation_timeout_ms = 30000;
  std::size_t pool_size = 1;
  std::size_t threads = 1;

  friend bool operator==(const EvaluatorConfig&, const EvaluatorConfig&) = default;
};

struct CampaignConfig {
  std::size_t inputs = 3;
  std::size_t outputs = 3;
  std::size_t batch_size = 10;
  double alpha = 2.0;
  double epsilon = 1e-4;
  std::vector<InputRange> ranges;           // empty means [0, 1] for every input
  EvaluatorConfig evaluator;
  std::vector<std::size_t> output_subset;   // 0-based; empty means all outputs
  std::optional<std::size_t> max_batches;

  void validate() const {
    if (inputs == 0) throw Error(ErrorKind::config, "need at least one input");
    if (outputs == 0) throw Error(ErrorKind::config, "need at least one output");
    if (batch_size == 0) throw Error(ErrorKind::config, "batch size must be >= 1");
    if (2 * inputs > SobolStream::max_dimension()) {
      throw Error(ErrorKind::config, "too many inputs for the Sobol' table");
    }
    if (!std::isfinite(alpha)) throw Error(ErrorKind::config, "alpha must be finite");
    if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw Error(ErrorKind::config, "epsilon must be positive");
    if (!ranges.empty() && ranges.size() != inputs) {
      throw Error(ErrorKind::config, "need one input range per input");
    }
    for (const auto& r : ranges) {
      if (!(r.lo < r.hi) || !std::isfinite(r.lo) || !std::isfinite(r.hi)) {
        throw Error(ErrorKind::config, "input ranges need lo < hi");
      }
    }
    for (auto j : output_subset) {
      if (j >= outputs) throw Error(ErrorKind::config, "output subset index outside the outputs");
    }
  }

  InputRange range(std::size_t i) const { return ranges.empty() ? InputRange{} : ranges[i]; }

  std::vector<std::size_t> density_outputs() const {
    if (!output_subset.empty()) return output_subset;
    std::vector<std::size_t> all(outputs);
    for (std::size_t j = 0; j < outputs; ++j) all[j] = j;
    return all;
  }

  friend bool operator==(const CampaignConfig&, const CampaignConfig&) = default;
};

enum class CampaignStatus { idle, running, paused, done };

inline const char* to_string(CampaignStatus s) {
  switch (s) {
    case CampaignStatus::idle: return "idle";
    case CampaignStatus::running: return "running-batch";
    case CampaignStatus::paused: return "paused";
    case CampaignStatus::done: return "done";
  }
  return "idle";
}

inline std::optional<CampaignStatus> parse_status(const std::string& s) {
  if (s == "idle") return CampaignStatus::idle;
  if (s == "running-batch") return CampaignStatus::running;
  if (s == "paused") return CampaignStatus::paused;
  if (s == "done") return CampaignStatus::done;
  return std::nullopt;
}

/// A batch drawn and planned but not yet committed.
struct BatchPlan {
  std::int64_t batch = 0;
  std::uint64_t cursor_after = 0;
  double alpha = 0.0;
  bool adaptive = false;
  std::vector<DesignRow> rows;
  std::vector<EvaluationRequest> requests;  // unit-cube coordinates
};

/// The adaptive sampling state machine. Single writer: callers serialize
/// access. Steering calls made while a batch is in flight are queued and
/// applied when it commits or aborts.
class Campaign {
 public:
  explicit Campaign(CampaignConfig config) : config_(std::move(config)) {
    config_.validate();
    alpha_ = config_.alpha;
    sums_ = JansenSums(config_.inputs, config_.outputs);
    boxcars_.assign(config_.inputs, {});
    overrides_.assign(config_.inputs, std::nullopt);
    refresh_curves();
  }

  const CampaignConfig& config() const { return config_; }
  std::uint64_t version() const { return version_; }
  CampaignStatus status() const { return status_; }
  std::uint64_t cursor() const { return cursor_; }
  double alpha() const { return alpha_; }
  const std::vector<double>& alpha_history() const { return alpha_history_; }
  std::size_t batches_completed() const { return batches_completed_; }
  std::size_t ingested_blocks() const { return ingested_blocks_; }
  std::uint64_t next_row() const { return next_row_; }
  const std::vector<EvaluationBlock>& blocks() const { return blocks_; }
  const std::vector<std::optional<PiecewiseConstantDensity>>& overrides() const { return overrides_; }
  std::size_t pending_commands() const { return pending_.size(); }

  std::size_t evaluation_count() const { return blocks_.size() * (config_.inputs + 2); }

  /// Inverse-CDF curves the next batch will sample through.
  const std::vector<CumulativeCurve>& sampling_curves() const { return curves_; }

  /// Indices from the incrementally maintained sums.
  std::optional<SensitivityIndices> indices() const {
    if (sums_.count() == 0) return std::nullopt;
    const bool biased = std::any_of(blocks_.begin(), blocks_.end(), [](const auto& b) { return b.adaptive; });
    return make_indices(sums_, biased);
  }

  const JansenSums& sums() const { return sums_; }

  /// Local sensitivity of all outputs on input i, from the maintained interval store.
  LocalSensitivity local(std::size_t i, double alpha) const {
    check_dimension(i);
    return sweep_boxcars(boxcars_.at(i), config_.outputs, alpha);
  }

  /// tau_ij (when `output` is set) or the average over the density outputs,
  /// zero outside the observed support.
  PiecewiseConstantDensity density(std::size_t i, std::optional<std::size_t> output = std::nullopt) const {
    if (blocks_.empty()) throw Error(ErrorKind::insufficient_data, "no evaluations yet");
    return computed_density(i, output, DensitySupport::observed, false);
  }

  /// The density the next batch samples dimension i from (override or
  /// computed average completed over [0, 1]); uniform before any data.
  PiecewiseConstantDensity sampling_density(std::size_t i) const {
    check_dimension(i);
    if (overrides_[i]) return *overrides_[i];
    if (blocks_.empty()) return {{0.0, 1.0}, {1.0}};
    try {
      return computed_density(i, std::nullopt, DensitySupport::unit_interval, true);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::degenerate_density) throw;
      return {{0.0, 1.0}, {1.0}};
    }
  }

  /// Cumulative local sensitivity T_ij(x) at the current alpha.
  std::optional<CumulativeCurve> cumulative(std::size_t i, std::size_t j) const {
    check_dimension(i);
    if (j >= config_.outputs) throw Error(ErrorKind::index_out_of_range, "output " + std::to_string(j + 1));
    if (blocks_.empty()) throw Error(ErrorKind::insufficient_data, "no evaluations yet");
    const auto t = local(i, alpha_).output(j);
    return cumulative_local(t, sums_.variance()[j], sums_.count());
  }

  // --- batch lifecycle -----------------------------------------------------

  BatchPlan prepare_batch() {
    if (status_ == CampaignStatus::running) throw Error(ErrorKind::concurrent_run, "a batch is already running");
    if (status_ == CampaignStatus::done) throw Error(ErrorKind::validation, "campaign reached its batch limit");
    const std::size_t m = config_.inputs;
    SobolStream stream(2 * m);
    stream.seek(cursor_);
    auto points = stream.next(config_.batch_size);

    BatchPlan plan;
    plan.batch = static_cast<std::int64_t>(batches_completed_) + 1;
    plan.cursor_after = stream.index();
    plan.alpha = alpha_;
    plan.adaptive = std::any_of(curves_.begin(), curves_.end(),
                                [](const CumulativeCurve& c) { return !(c == CumulativeCurve::identity()); });
    if (plan.adaptive) points = transform_points(points, curves_);
    plan.rows = build_design_rows(points, m, next_row_, plan.batch);
    plan.requests = evaluation_plan(plan.rows);
    resume_status_ = status_;
    status_ = CampaignStatus::running;
    ++version_;
    return plan;
  }

  /// Requests with x mapped to physical input ranges.
  std::vector<EvaluationRequest> physical_requests(const BatchPlan& plan) const {
    auto out = plan.requests;
    for (auto& r : out) {
      for (std::size_t i = 0; i < r.x.size(); ++i) r.x[i] = config_.range(i).to_physical(r.x[i]);
    }
    return out;
  }

  /// Commit evaluated outputs (in request order). Returns the new blocks.
  std::vector<EvaluationBlock> commit_batch(const BatchPlan& plan, const std::vector<std::vector<double>>& outputs) {
    if (status_ != CampaignStatus::running) throw Error(ErrorKind::validation, "no batch in flight");
    const std::size_t m = config_.inputs;
    const std::size_t n = config_.outputs;
    if (outputs.size() != plan.requests.size()) {
      abort_batch();
      throw Error(ErrorKind::evaluation, "expected " + std::to_string(plan.requests.size()) + " results");
    }
    std::vector<EvaluationBlock> fresh;
    fresh.reserve(plan.rows.size());
    for (std::size_t r = 0; r < plan.rows.size(); ++r) {
      const auto& row = plan.rows[r];
      EvaluationBlock block{row.row, row.batch, plan.adaptive, row.a, row.b, {}, {}, Matrix(m, n)};
      const std::size_t base = r * (m + 2);
      for (std::size_t q = 0; q < m + 2; ++q) {
        const auto& y = outputs[base + q];
        const bool finite = std::all_of(y.begin(), y.end(), [](double v) { return std::isfinite(v); });
        if (y.size() != n || !finite) {
          abort_batch();
          throw Error(ErrorKind::evaluation, "bad output for row " + std::to_string(row.row) + " " +
                                                 plan.requests[base + q].tag.str());
        }
      }
      block.ya = outputs[base];
      block.yb = outputs[base + 1];
      for (std::size_t i = 0; i < m; ++i) {
        std::copy(outputs[base + 2 + i].begin(), outputs[base + 2 + i].end(), block.yab.row(i).begin());
      }
      fresh.push_back(std::move(block));
    }
    append_blocks(fresh);
    cursor_ = plan.cursor_after;
    ++batches_completed_;
    alpha_history_.push_back(plan.alpha);
    status_ = resume_status_;
    if (config_.max_batches && batches_completed_ >= *config_.max_batches) status_ = CampaignStatus::done;
    ++version_;
    drain_pending();
    refresh_curves();
    return fresh;
  }

  /// Drop the in-flight batch; nothing from it is kept.
  void abort_batch() {
    if (status_ != CampaignStatus::running) return;
    status_ = resume_status_;
    ++version_;
    drain_pending();
  }

  std::vector<EvaluationBlock> run_batch(Evaluator& evaluator) {
    auto plan = prepare_batch();
    std::vector<std::vector<double>> outputs;
    try {
      outputs = evaluator.evaluate(physical_requests(plan));
    } catch (...) {
      abort_batch();
      throw;
    }
    return commit_batch(plan, outputs);
  }

  // --- steering ----------------------------------------------------------------
  // Each returns its position in the pending queue, 0 when applied at once.

  std::size_t set_alpha(double alpha) {
    if (!std::isfinite(alpha)) throw Error(ErrorKind::validation, "alpha must be finite");
    return submit(SetAlpha{alpha});
  }

  std::size_t override_density(std::size_t i, PiecewiseConstantDensity density) {
    check_dimension(i);
    density.validate();
    if (density.empty()) throw Error(ErrorKind::validation, "override density is empty");
    // Keep only the part on [0, 1].
    PiecewiseConstantDensity clipped;
    for (std::size_t k = 0; k < density.values.size(); ++k) {
      const double lo = std::max(0.0, density.breakpoints[k]);
      const double hi = std::min(1.0, density.breakpoints[k + 1]);
      if (!(lo < hi)) continue;
      if (clipped.breakpoints.empty() || clipped.breakpoints.back() != lo) {
        if (!clipped.breakpoints.empty()) clipped.values.push_back(0.0);
        clipped.breakpoints.push_back(lo);
      }
      clipped.values.push_back(density.values[k]);
      clipped.breakpoints.push_back(hi);
    }
    const double mass = clipped.empty() ? 0.0 : clipped.integral();
    if (!(mass > 0.0)) throw Error(ErrorKind::validation, "override density has no mass on [0, 1]");
    for (double& v : clipped.values) v /= mass;
    return submit(Override{i, std::move(clipped)});
  }

  std::size_t clear_override(std::size_t i) {
    check_dimension(i);
    return submit(ClearOverride{i});
  }

  /// Merge previously computed blocks (unit-cube x). Validated now and again
  /// when applied; a rejected ingest leaves the state untouched.
  std::size_t ingest_external(std::vector<EvaluationBlock> blocks) {
    validate_ingest(blocks);
    return submit(Ingest{std::move(blocks)});
  }

  std::size_t pause() { return submit(SetStatus{CampaignStatus::paused}); }
  std::size_t resume() { return submit(SetStatus{CampaignStatus::idle}); }

  // --- persistence support ---------------------------------------------------

  struct Snapshot {
    CampaignConfig config;
    std::uint64_t version = 1;
    std::uint64_t cursor = 0;
    CampaignStatus status = CampaignStatus::idle;
    double alpha = 2.0;
    std::vector<double> alpha_history;
    std::size_t batches_completed = 0;
    std::size_t ingested_blocks = 0;
    std::uint64_t next_row = 1;
    std::vector<std::optional<PiecewiseConstantDensity>> overrides;
    std::vector<EvaluationBlock> blocks;
  };

  Snapshot snapshot() const {
    return {config_, version_, cursor_,
            status_ == CampaignStatus::running ? resume_status_ : status_,
            alpha_, alpha_history_, batches_completed_, ingested_blocks_, next_row_, overrides_, blocks_};
  }

  static Campaign restore(Snapshot s) {
    Campaign c(s.config);
    if (s.overrides.size() != s.config.inputs) throw Error(ErrorKind::parse, "overrides do not match inputs");
    c.append_blocks(s.blocks);
    c.version_ = s.version;
    c.cursor_ = s.cursor;
    c.status_ = s.status;
    c.alpha_ = s.alpha;
    c.alpha_history_ = std::move(s.alpha_history);
    c.batches_completed_ = s.batches_completed;
    c.ingested_blocks_ = s.ingested_blocks;
    c.next_row_ = s.next_row;
    c.overrides_ = std::move(s.overrides);
    c.refresh_curves();
    return c;
  }

  /// Recompute every derived quantity from the log alone.
  static Campaign rebuilt(const Campaign& source) { return restore(source.snapshot()); }

 private:
  struct SetAlpha { double alpha; };
  struct Override { std::size_t dim; PiecewiseConstantDensity density; };
  struct ClearOverride { std::size_t dim; };
  struct Ingest { std::vector<EvaluationBlock> blocks; };
  struct SetStatus { CampaignStatus status; };
  using Command = std::variant<SetAlpha, Override, ClearOverride, Ingest, SetStatus>;

  void check_dimension(std::size_t i) const {
    if (i >= config_.inputs) {
      throw Error(ErrorKind::index_out_of_range,
                  "input " + std::to_string(i + 1) + " outside 1.." + std::to_string(config_.inputs));
    }
  }

  std::size_t submit(Command command) {
    if (status_ == CampaignStatus::running) {
      pending_.push_back(std::move(command));
      return pending_.size();
    }
    apply(command);
    return 0;
  }

  void drain_pending() {
    while (!pending_.empty()) {
      auto command = std::move(pending_.front());
      pending_.pop_front();
      try {
        apply(command);
      } catch (const Error&) {
        // Rejected at apply time (e.g. an ingest that now collides); state unchanged.
      }
    }
  }

  void apply(Command& command) {
    std::visit(
        [this](auto& c) {
          using T = std::decay_t<decltype(c)>;
          if constexpr (std::is_same_v<T, SetAlpha>) {
            alpha_ = c.alpha;
          } else if constexpr (std::is_same_v<T, Override>) {
            overrides_[c.dim] = std::move(c.density);
          } else if constexpr (std::is_same_v<T, ClearOverride>) {
            overrides_[c.dim].reset();
          } else if constexpr (std::is_same_v<T, Ingest>) {
            validate_ingest(c.blocks);
            for (const auto& b : c.blocks) next_row_ = std::max(next_row_, b.row + 1);
            ingested_blocks_ += c.blocks.size();
            append_blocks(c.blocks);
          } else if constexpr (std::is_same_v<T, SetStatus>) {
            if (status_ != CampaignStatus::done) status_ = c.status;
          }
        },
        command);
    ++version_;
    refresh_curves();
  }

  void validate_ingest(std::span<const EvaluationBlock> blocks) const {
    std::set<std::uint64_t> seen;
    for (const auto& b : blocks_) seen.insert(b.row);
    for (const auto& b : blocks) {
      const std::string where = "block " + std::to_string(b.row);
      if (b.row == 0) throw Error(ErrorKind::ingest, where + ": row index must be >= 1");
      if (b.inputs() != config_.inputs || b.xb.size() != config_.inputs || b.outputs() != config_.outputs ||
          b.yb.size() != config_.outputs || b.yab.rows() != config_.inputs || b.yab.cols() != config_.outputs) {
        throw Error(ErrorKind::ingest, where + ": shape does not match (m, n)");
      }
      if (!seen.insert(b.row).second) throw Error(ErrorKind::ingest, where + ": duplicate row index");
      for (std::size_t i = 0; i < config_.inputs; ++i) {
        if (!(b.xa[i] >= 0.0 && b.xa[i] <= 1.0 && b.xb[i] >= 0.0 && b.xb[i] <= 1.0)) {
          throw Error(ErrorKind::ingest, where + ": inputs outside the declared ranges");
        }
      }
      const auto finite = [](double v) { return std::isfinite(v); };
      if (!std::all_of(b.ya.begin(), b.ya.end(), finite) || !std::all_of(b.yb.begin(), b.yb.end(), finite) ||
          !std::all_of(b.yab.data().begin(), b.yab.data().end(), finite)) {
        throw Error(ErrorKind::ingest, where + ": non-finite output");
      }
    }
  }

  void append_blocks(std::span<const EvaluationBlock> fresh) {
    for (std::size_t i = 0; i < config_.inputs; ++i) {
      std::vector<Boxcar> added;
      added.reserve(fresh.size());
      for (const auto& b : fresh) added.push_back(make_boxcar(b, i, config_.epsilon));
      std::sort(added.begin(), added.end());
      auto& store = boxcars_[i];
      const auto middle = store.insert(store.end(), std::make_move_iterator(added.begin()),
                                       std::make_move_iterator(added.end()));
      std::inplace_merge(store.begin(), middle, store.end());
    }
    for (const auto& b : fresh) {
      sums_.add(b);
      blocks_.push_back(b);
      next_row_ = std::max(next_row_, b.row + 1);
    }
  }

  PiecewiseConstantDensity computed_density(std::size_t i, std::optional<std::size_t> output,
                                            DensitySupport support, bool skip_degenerate) const {
    check_dimension(i);
    const auto weighted = local(i, alpha_);
    const auto counts = local(i, 0.0);
    std::vector<std::size_t> outputs;
    if (output) {
      if (*output >= config_.outputs) throw Error(ErrorKind::index_out_of_range, "output " + std::to_string(*output + 1));
      outputs.push_back(*output);
    } else {
      outputs = config_.density_outputs();
    }
    std::vector<PiecewiseConstantDensity> taus;
    for (auto j : outputs) {
      try {
        taus.push_back(sensitivity_density(weighted.output(j), counts.output(j), support));
      } catch (const Error& e) {
        if (!skip_degenerate || e.kind() != ErrorKind::degenerate_density) throw;
      }
    }
    if (taus.empty()) throw Error(ErrorKind::degenerate_density, "no output has a usable density on input " + std::to_string(i + 1));
    return average_density(taus);
  }

  void refresh_curves() {
    curves_.assign(config_.inputs, CumulativeCurve::identity());
    for (std::size_t i = 0; i < config_.inputs; ++i) {
      if (!overrides_[i] && blocks_.empty()) continue;
      const auto density = sampling_density(i);
      curves_[i] = density == PiecewiseConstantDensity{{0.0, 1.0}, {1.0}} ? CumulativeCurve::identity()
                                                                           : cumulative_density(density);
    }
  }

  CampaignConfig config_;
  std::uint64_t version_ = 1;
  std::uint64_t cursor_ = 0;
  CampaignStatus status_ = CampaignStatus::idle;
  CampaignStatus resume_status_ = CampaignStatus::idle;
  double alpha_ = 2.0;
  std::vector<double> alpha_history_;
  std::size_t batches_completed_ = 0;
  std::size_t ingested_blocks_ = 0;
  std::uint64_t next_row_ = 1;
  std::vector<EvaluationBlock> blocks_;
  JansenSums sums_;
  std::vector<std::vector<Boxcar>> boxcars_;
  std::vector<std::optional<PiecewiseConstantDensity>> overrides_;
  std::vector<CumulativeCurve> curves_;
  std::deque<Command> pending_;
};

}  // namespace sensa
