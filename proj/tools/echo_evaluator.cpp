// Reference evaluator for the line-delimited JSON protocol: answers y := x.
// Fault switches exist so the engine's error paths can be exercised.

#include <cstdint>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Echo evaluator"};
  std::size_t reverse = 1;
  std::int64_t hang_on = -1, malformed_on = -1, unknown_on = -1, exit_on = -1;
  std::size_t outputs = 0;
  bool no_ready = false;
  app.add_option("--reverse", reverse, "Answer requests in reversed groups of this size");
  app.add_option("--hang-on", hang_on, "Never answer this request id");
  app.add_option("--malformed-on", malformed_on, "Answer this id with a garbage line");
  app.add_option("--unknown-on", unknown_on, "Answer this id under a different id");
  app.add_option("--exit-on", exit_on, "Exit when this id arrives");
  app.add_option("--outputs", outputs, "Force the output count (default: echo all of x)");
  app.add_flag("--no-ready", no_ready, "Never complete the handshake");
  CLI11_PARSE(app, argc, argv);

  using nlohmann::json;
  std::vector<json> held;
  const auto flush = [&] {
    for (auto it = held.rbegin(); it != held.rend(); ++it) std::cout << it->dump() << '\n';
    held.clear();
    std::cout.flush();
  };

  std::string line;
  while (std::getline(std::cin, line)) {
    const auto msg = json::parse(line, nullptr, false);
    if (msg.is_discarded()) continue;
    if (msg.contains("hello")) {
      if (no_ready) continue;
      std::cout << json{{"ready", true}}.dump() << '\n' << std::flush;
      continue;
    }
    const auto id = msg.at("id").get<std::int64_t>();
    if (id == exit_on) return 3;
    if (id == hang_on) {
      flush();
      std::this_thread::sleep_for(std::chrono::hours(1));
    }
    if (id == malformed_on) {
      std::cout << "this is not json {" << std::endl;
      continue;
    }
    auto y = msg.at("x").get<std::vector<double>>();
    if (outputs) y.resize(outputs, 0.0);
    held.push_back({{"id", id == unknown_on ? id + 1'000'000 : id}, {"y", y}});
    if (held.size() >= reverse) flush();
  }
  flush();
  return 0;
}
