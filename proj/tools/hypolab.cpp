// hypolab <command> --config <file> [--seed N] [--workers K] [--out DIR] [--suite NAME]

#include "hypolab/app.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

using namespace hypolab;

std::optional<std::uint64_t> parse_seed(const std::string& text) {
  try {
    std::size_t used = 0;
    const auto v = std::stoull(text, &used, 0);
    if (used != text.size()) return std::nullopt;
    return v;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

std::string command_list() {
  std::string out;
  for (const auto& c : harness::command_table()) out += (out.empty() ? "" : ", ") + std::string(c.name);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Numerical lab for diffusions on sub-Riemannian structures"};
  std::string command, config_path, seed_text, out_dir, suite;
  int workers = 0;
  bool quiet = false;
  app.add_option("command", command, "one of: " + command_list())->required();
  app.add_option("--config,-c", config_path, "experiment configuration file");
  app.add_option("--seed", seed_text, "64-bit seed, decimal or 0x hex (overrides the config)");
  app.add_option("--workers", workers, "worker threads (overrides the config)")->check(CLI::PositiveNumber);
  app.add_option("--out", out_dir, "output directory (overrides the config key 'output')");
  app.add_option("--suite", suite, "audit-all suite: quick or full");
  app.add_flag("--quiet,-q", quiet, "no progress output");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : harness::kConfigInvalid;
  }

  Config cfg;
  if (!config_path.empty()) {
    try {
      cfg = load_config(config_path);
    } catch (const ConfigError& e) {
      std::cerr << "config error: " << e.what() << "\n";
      return harness::kConfigInvalid;
    }
  } else if (command != "audit-all") {
    std::cerr << "config error: --config is required for '" << command << "'\n";
    return harness::kConfigInvalid;
  }

  harness::Overrides over;
  if (!seed_text.empty()) {
    over.seed = parse_seed(seed_text);
    if (!over.seed) {
      std::cerr << "config error: --seed: not an integer '" << seed_text << "'\n";
      return harness::kConfigInvalid;
    }
  }
  if (workers > 0) over.workers = workers;
  if (!suite.empty()) over.suite = suite;
  if (!quiet) over.progress = [](const std::string& line) { std::cerr << line << std::endl; };

  auto outcome = harness::run(command, cfg, over);
  if (outcome.status == harness::kConfigInvalid || outcome.status == harness::kInfeasible) {
    std::cerr << outcome.message << "\n";
    return outcome.status;
  }

  if (out_dir.empty()) {
    const auto* top = cfg.section("");
    const auto* e = top ? top->find("output") : nullptr;
    out_dir = e && e->value.is_string() ? std::get<std::string>(e->value.data) : "hypolab-out/" + command;
  }
  try {
    outcome.report.write(out_dir, harness::summary_header(command, outcome.settings.seed, outcome.settings.workers));
  } catch (const std::exception& e) {
    std::cerr << "cannot write results to " << out_dir << ": " << e.what() << "\n";
    return harness::kConfigInvalid;
  }
  for (const auto& a : outcome.report.assertions())
    std::cout << (a.pass ? "PASS " : "FAIL ") << a.name << "  " << a.detail << "\n";
  std::cout << outcome.report.records().size() << " records written to " << out_dir << "/results.jsonl\n";
  std::cout << "status " << outcome.status << " (" << outcome.message << ")\n";
  return outcome.status;
}
