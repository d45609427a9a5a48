#pragma once
// Command dispatch shared by the CLI and the harness tests.

#include "hypolab/harness.hpp"
#include "hypolab/suite.hpp"

namespace hypolab::harness {

namespace detail {

inline void cmd_audit_all(Context& c) {
  auto& r = c.reader;
  const std::string name = c.settings.suite.value_or(r.text("", "suite", "quick"));
  r.finish();
  const auto settings = suite::settings_for(name);
  if (!settings) throw ConfigError(0, "suite", "unknown suite '" + name + "' (expected quick or full)");
  const auto rep = suite::run_suite(*settings, c.settings.seed, c.settings.workers,
                                    [&](const suite::CriterionResult& cr) {
                                      if (c.settings.progress)
                                        c.settings.progress("criterion " + std::to_string(cr.id) + " " +
                                                            (cr.pass ? "PASS" : "FAIL"));
                                    });
  for (const auto& cr : rep.criteria) {
    if (cr.id != 9)
      for (const auto& rec : cr.records) c.report.record(rec);
    c.report.csv_row("criteria.csv", {std::to_string(cr.id), cr.pass ? "PASS" : "FAIL",
                                      format_number(cr.worst_margin), "\"" + cr.title + "\""});
    std::string detail;
    for (const auto& line : cr.checks) detail += "\n    " + line;
    c.report.check("criterion " + std::to_string(cr.id) + " " + cr.title, cr.pass, detail);
  }
  c.report.csv_header("criteria.csv", {"criterion", "status", "worst_margin", "title"});
  c.report.note("suite " + name);
  c.report.note(rep.table());
}

}  // namespace detail

struct Command {
  std::string_view name;
  std::function<void(Context&)> handler;
  std::vector<std::string_view> operations;  // module operations reachable from it
};

inline const std::vector<Command>& command_table() {
  static const std::vector<Command> table = {
      {"distance", detail::cmd_distance,
       {"cometric", "distance", "shoot_refine", "integrate_control", "energy", "distance_to_set",
        "distance_through_set", "distance_to_infinity", "hsu_condition"}},
      {"dual", detail::cmd_dual, {"dual_certificate_check", "distance", "distance_to_set"}},
      {"volume", detail::cmd_volume,
       {"homogeneous_dimension", "lie_bracket", "ball_volume", "dimension_estimate", "doubling_ratio",
        "chart_exponent"}},
      {"simulate", detail::cmd_simulate, {"simulate", "hormander_drift", "sector_bound", "augment_with_time"}},
      {"kernel", detail::cmd_kernel, {"estimate_kernel", "estimate_kernel_dirichlet", "reflected_kernel"}},
      {"hitprob", detail::cmd_hitprob, {"hitting_probability", "hitting_time_samples", "hitting_bound_audit"}},
      {"through", detail::cmd_through, {"through_kernel", "through_bound_audit"}},
      {"varadhan", detail::cmd_varadhan, {"varadhan_audit", "hsu_condition"}},
      {"bridge", detail::cmd_bridge,
       {"sample_bridge_rejection", "sample_bridge_tilted", "concentration_diagnostic", "strong_minimality_report",
        "min_energy_outside"}},
      {"audit-all", detail::cmd_audit_all, {"audit_all"}},
  };
  return table;
}

inline const Command* find_command(std::string_view name) {
  for (const auto& c : command_table())
    if (c.name == name) return &c;
  return nullptr;
}

/// Every operation of the library modules, for the coverage self-test.
/// `run` is the dispatcher itself.
inline std::vector<std::string_view> module_operations() {
  return {"cometric",
          "lie_bracket",
          "homogeneous_dimension",
          "hormander_drift",
          "sector_bound",
          "augment_with_time",
          "integrate_control",
          "energy",
          "distance",
          "shoot_refine",
          "distance_to_set",
          "distance_through_set",
          "distance_to_infinity",
          "hsu_condition",
          "dual_certificate_check",
          "ball_volume",
          "dimension_estimate",
          "doubling_ratio",
          "chart_exponent",
          "min_energy_outside",
          "simulate",
          "hitting_time_samples",
          "estimate_kernel",
          "estimate_kernel_dirichlet",
          "through_kernel",
          "hitting_probability",
          "reflected_kernel",
          "varadhan_audit",
          "hitting_bound_audit",
          "through_bound_audit",
          "sample_bridge_rejection",
          "sample_bridge_tilted",
          "concentration_diagnostic",
          "strong_minimality_report",
          "run",
          "audit_all"};
}

struct RunOutcome {
  int status = kOk;
  std::string message;
  Report report;
  RunSettings settings;
};

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::optional<std::string> suite;
  std::function<void(const std::string&)> progress;
};

/// Runs one command; never throws. Config problems give status 2, failed
/// assertions 1, infeasible Monte Carlo 3.
inline RunOutcome run(const std::string& command, const Config& cfg, const Overrides& over = {}) {
  RunOutcome out;
  auto fail = [&](int status, const std::string& msg) {
    out.status = status;
    out.message = msg;
  };
  try {
    Reader r(cfg);
    if (const auto* v = r.get("", "command")) {
      if (!v->is_string() || std::get<std::string>(v->data) != command)
        throw ConfigError(v->line, "command", "config is for a different command");
    }
    RunSettings& rs = out.settings;
    if (const auto* v = r.get("", "seed")) {
      if (!v->is_int()) Reader::fail(v, "", "seed", "expected an integer");
      rs.seed = static_cast<std::uint64_t>(std::get<std::int64_t>(v->data));
    }
    rs.workers = static_cast<int>(r.count("", "workers", 1));
    r.get("", "output");  // consumed by the CLI
    if (over.seed) rs.seed = *over.seed;
    if (over.workers) rs.workers = *over.workers;
    rs.suite = over.suite;
    rs.progress = over.progress;
    if (rs.workers < 1) throw ConfigError(0, "workers", "must be positive");
    const Command* cmd = find_command(command);
    if (!cmd) throw ConfigError(0, "command", "unknown command '" + command + "'");
    Context ctx{r, rs, out.report};
    cmd->handler(ctx);
    out.status = out.report.all_pass() ? kOk : kAssertionFailed;
    out.message = out.report.all_pass() ? "ok" : "assertion failures";
  } catch (const ConfigError& e) {
    fail(kConfigInvalid, std::string("config error: ") + e.what());
  } catch (const InfeasibleError& e) {
    fail(kInfeasible, std::string("infeasible: ") + e.what() + " (raise t, n_paths or enable tilting)");
  } catch (const InsufficientSamples& e) {
    fail(kInfeasible, std::string("infeasible: ") + e.what() + " (raise n_paths, enable tilt or use larger t)");
  } catch (const DomainError& e) {
    fail(kConfigInvalid, std::string("invalid point: ") + e.what());
  } catch (const ArgumentError& e) {
    fail(kConfigInvalid, std::string("invalid argument: ") + e.what());
  } catch (const NotBracketGenerating& e) {
    fail(kConfigInvalid, std::string("invalid model: ") + e.what());
  }
  return out;
}

}  // namespace hypolab::harness
