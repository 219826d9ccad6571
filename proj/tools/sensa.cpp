// Command-line front end: run campaigns, export indices and densities,
// bootstrap curves, ingest prior evaluations and serve the steering API.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sensa/bootstrap.hpp"
#include "sensa/campaign.hpp"
#include "sensa/models.hpp"
#include "sensa/serialization.hpp"
#include "sensa/service.hpp"

namespace {

using namespace sensa;

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::config, "cannot read " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  out << text;
  if (!out) throw Error(ErrorKind::config, "cannot write " + path);
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> values;
  std::istringstream in(text);
  for (std::string item; std::getline(in, item, ',');) {
    std::size_t used = 0;
    const double v = std::stod(item, &used);
    if (used != item.size()) throw Error(ErrorKind::validation, "not a number: " + item);
    values.push_back(v);
  }
  return values;
}

Campaign load_campaign(const std::string& path) { return load_state(read_file(path)); }

int cmd_run(const std::string& config_path, const std::string& state_path, std::size_t batches) {
  const auto files = CampaignFiles::beside(state_path);
  Campaign campaign = std::filesystem::exists(state_path)
                          ? load_campaign(state_path)
                          : Campaign(load_config(read_file(config_path)));
  auto evaluator = make_evaluator(campaign.config());
  for (std::size_t b = 0; b < batches; ++b) {
    if (campaign.status() == CampaignStatus::done) {
      std::cerr << "campaign reached its batch limit after " << campaign.batches_completed() << " batches\n";
      break;
    }
    const auto fresh = campaign.run_batch(*evaluator);
    files.append(fresh, campaign.config());
    files.save(campaign);
  }
  files.save(campaign);
  std::cout << "batches " << campaign.batches_completed() << ", evaluations " << campaign.evaluation_count()
            << ", version " << campaign.version() << '\n';
  return 0;
}

int cmd_indices(const std::string& state_path, const std::string& out_path, bool uniform_only) {
  const auto campaign = load_campaign(state_path);
  if (campaign.blocks().empty()) throw Error(ErrorKind::insufficient_data, "campaign has no evaluations");
  const auto ix = uniform_only ? estimate_indices(campaign.blocks(), true) : estimate_indices(campaign.blocks());
  std::ostringstream out;
  write_indices_csv(out, ix);
  if (out_path.empty() || out_path == "-") std::cout << out.str();
  else write_file(out_path, out.str());
  return 0;
}

int cmd_density(const std::string& state_path, std::size_t dim, std::size_t output, bool sampling,
                const std::string& out_path) {
  const auto campaign = load_campaign(state_path);
  const std::size_t i = dim - 1;
  const std::optional<std::size_t> j = output ? std::optional<std::size_t>(output - 1) : std::nullopt;
  const auto density = sampling ? campaign.sampling_density(i) : campaign.density(i, j);
  json body = {{"density", density_json(density, dim, campaign.alpha(), campaign.config().epsilon)},
               {"cumulative", curve_json(cumulative_density(density))}};
  if (j) body["output"] = output;
  if (out_path.empty() || out_path == "-") std::cout << body.dump() << '\n';
  else write_file(out_path, body.dump());
  return 0;
}

int cmd_bootstrap(const std::string& state_path, std::size_t dim, std::size_t output, std::size_t replicates,
                  std::uint64_t seed, const std::string& out_path) {
  const auto campaign = load_campaign(state_path);
  if (campaign.blocks().empty()) throw Error(ErrorKind::insufficient_data, "campaign has no evaluations");
  const AlphaEpsilon params{campaign.alpha(), campaign.config().epsilon};
  const auto& blocks = campaign.blocks();
  const auto t = boxcar_contributions(blocks, dim - 1, output - 1, params);
  const auto point = cumulative_local(t, estimate_variance(blocks).at(output - 1), blocks.size());
  json replicates_json = json::array();
  for (const auto& c : bootstrap_curves(blocks, dim - 1, output - 1, params, {replicates, seed})) {
    replicates_json.push_back(curve_json(c));
  }
  json body = {{"dimension", dim}, {"output", output}, {"alpha", params.alpha}, {"epsilon", params.epsilon},
               {"seed", seed},     {"point", point ? curve_json(*point) : json(nullptr)},
               {"replicates", replicates_json}};
  if (out_path.empty() || out_path == "-") std::cout << body.dump() << '\n';
  else write_file(out_path, body.dump());
  return 0;
}

int cmd_demo_eval(const std::string& x_text, const std::string& times_text) {
  const auto x = parse_list(x_text);
  const auto times = parse_list(times_text);
  const auto params = SyntheticModelParams::reference();
  const auto rows = synthetic_eval(x, times, params);
  std::printf("time");
  for (std::size_t j = 0; j < params.outputs; ++j) std::printf(" %10zu", j + 1);
  std::printf("\n");
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::printf("%g", times[r]);
    for (double v : rows[r]) std::printf(" %10.7f", v);
    std::printf("\n");
  }
  return 0;
}

int cmd_ingest(const std::string& state_path, const std::string& log_path) {
  auto campaign = load_campaign(state_path);
  std::ifstream in(log_path);
  if (!in) throw Error(ErrorKind::config, "cannot read " + log_path);
  auto blocks = parse_log(in, campaign.config());
  const auto count = blocks.size();
  campaign.ingest_external(blocks);
  const auto files = CampaignFiles::beside(state_path);
  files.append(blocks, campaign.config());
  files.save(campaign);
  std::cout << "ingested " << count << " blocks, version " << campaign.version() << '\n';
  return 0;
}

int cmd_serve(const std::string& state_path, const std::string& host, int port) {
  auto campaign = load_campaign(state_path);
  auto evaluator = make_evaluator(campaign.config());
  CampaignService service(std::move(campaign), std::move(evaluator), CampaignFiles::beside(state_path));
  std::cerr << "serving " << state_path << " on http://" << host << ':' << port << '\n';
  if (!service.listen(host, port)) throw Error(ErrorKind::config, "cannot listen on port " + std::to_string(port));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive variance-based sensitivity analysis"};
  app.require_subcommand(1);

  std::string config_path, state_path = "campaign.state.json", out_path, log_path, x_text, times_text;
  std::string host = "127.0.0.1";
  std::size_t batches = 1, dim = 1, output = 0, replicates = 25;
  std::uint64_t seed = 0;
  int port = 8080;
  bool uniform_only = false, sampling = false;

  auto* run = app.add_subcommand("run", "Run adaptive batches, persisting the state file");
  run->add_option("--config", config_path, "Campaign config (JSON); used when the state file does not exist");
  run->add_option("--batches", batches, "Number of batches")->required();
  run->add_option("--state", state_path, "State snapshot file");

  auto* indices = app.add_subcommand("indices", "Write first-order and total indices as CSV");
  indices->add_option("--state", state_path)->required();
  indices->add_option("--out", out_path, "CSV file, '-' for stdout");
  indices->add_flag("--uniform-only", uniform_only, "Use only uniformly sampled batches");

  auto* density = app.add_subcommand("density", "Write a sensitivity density and its cumulative curve");
  density->add_option("--state", state_path)->required();
  density->add_option("--dim", dim, "Input dimension (1-based)")->required()->check(CLI::PositiveNumber);
  density->add_option("--output", output, "Output (1-based); omit for the average over outputs")
      ->check(CLI::PositiveNumber);
  density->add_flag("--sampling", sampling, "The density the next batch samples from");
  density->add_option("--out", out_path);

  auto* boot = app.add_subcommand("bootstrap", "Bootstrap cumulative local sensitivity curves");
  boot->add_option("--state", state_path)->required();
  boot->add_option("--dim", dim)->required()->check(CLI::PositiveNumber);
  boot->add_option("--output", output)->required()->check(CLI::PositiveNumber);
  boot->add_option("-R,--replicates", replicates);
  boot->add_option("--seed", seed);
  boot->add_option("--out", out_path);

  auto* demo = app.add_subcommand("demo", "Built-in model demonstrations");
  demo->require_subcommand(1);
  auto* eval = demo->add_subcommand("eval", "Evaluate the synthetic model at x over times");
  eval->add_option("--x", x_text, "Comma-separated inputs")->required();
  eval->add_option("--times", times_text, "Comma-separated ascending times from 0")->required();

  auto* ingest = app.add_subcommand("ingest", "Merge an evaluation log (JSON Lines) into a campaign");
  ingest->add_option("--state", state_path)->required();
  ingest->add_option("--log", log_path)->required();

  auto* serve = app.add_subcommand("serve", "Serve the HTTP steering API");
  serve->add_option("--state", state_path)->required();
  serve->add_option("--port", port);
  serve->add_option("--host", host);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      if (config_path.empty() && !std::filesystem::exists(state_path)) {
        throw Error(ErrorKind::config, "--config is required to start a new campaign");
      }
      return cmd_run(config_path, state_path, batches);
    }
    if (*indices) return cmd_indices(state_path, out_path, uniform_only);
    if (*density) return cmd_density(state_path, dim, output, sampling, out_path);
    if (*boot) return cmd_bootstrap(state_path, dim, output, replicates, seed, out_path);
    if (*eval) return cmd_demo_eval(x_text, times_text);
    if (*ingest) return cmd_ingest(state_path, log_path);
    if (*serve) return cmd_serve(state_path, host, port);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
