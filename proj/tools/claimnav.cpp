// claimnav: run single scenarios or seeded batches, plot traces and explain
// failed runs.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "claimnav/report.hpp"

namespace fs = std::filesystem;
using namespace claimnav;

namespace {

enum Exit { kOk = 0, kRunFailed = 1, kInvalid = 2, kIo = 3 };

struct Common {
  std::string map;
  std::string scenario;
  std::size_t agents = 2;
  std::uint64_t seed = 1;
  std::string mode = "claims";
  std::string out;
  std::string config;
  std::vector<std::string> overrides;
  bool strict_map = false;
  std::size_t max_route_areas = 0;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--map", c.map, "Map JSON file or bundled map name");
  cmd->add_option("--agents", c.agents, "Number of agents")->check(CLI::NonNegativeNumber);
  cmd->add_option("--seed", c.seed, "Seed for scenario generation");
  cmd->add_option("--mode", c.mode, "claims or never")->check(CLI::IsMember({"claims", "never"}));
  cmd->add_option("--out", c.out, "Output directory (default: $CLAIMNAV_OUT or ./claimnav_out)");
  cmd->add_option("--config", c.config, "JSON file with MPC settings");
  cmd->add_option("--override", c.overrides, "MPC setting as key=value; repeatable");
  cmd->add_flag("--strict-map", c.strict_map, "Reject unknown keys in map files");
  cmd->add_option("--max-route-areas", c.max_route_areas, "Draw goals within this many route areas (0: any)");
}

fs::path out_dir(const Common& c) {
  if (!c.out.empty()) return c.out;
  if (const char* env = std::getenv("CLAIMNAV_OUT")) return env;
  return "claimnav_out";
}

MPCConfig make_config(const Common& c, MPCConfig base) {
  if (!c.config.empty()) base = config_from_json(read_json_file(c.config), base);
  for (const auto& kv : c.overrides) apply_override(base, kv);
  base.validate();
  return base;
}

ScenarioOptions scenario_options(const Common& c) {
  ScenarioOptions o;
  o.max_route_areas = c.max_route_areas;
  return o;
}

SimOptions sim_options(const Common& c) {
  SimOptions o;
  o.mode = *parse_mode(c.mode);
  return o;
}

int cmd_run(const Common& c) {
  Scenario sc;
  if (!c.scenario.empty()) {
    if (c.map.empty()) {
      sc = load_scenario(c.scenario, nullptr, c.strict_map);
    } else {
      const SemanticMap map = resolve_map(c.map, c.strict_map);
      sc = load_scenario(c.scenario, &map, c.strict_map);
      sc.map_name = c.map;
    }
    sc.config = make_config(c, sc.config);
  } else {
    if (c.map.empty()) throw ParseError("--map or --scenario is required");
    const MPCConfig config = make_config(c, {});
    sc = generate_scenario(resolve_map(c.map, c.strict_map), c.agents, c.seed, config, scenario_options(c), c.map);
  }
  const SimOptions opt = sim_options(c);
  const auto [rec, m] = run(sc, opt);
  const fs::path dir = out_dir(c);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot open output directory " + dir.string());
  save_scenario(sc, dir / "scenario.json");
  {
    auto f = detail::open_out(dir / "trace.jsonl");
    write_trace(f, sc, opt.mode, rec, m);
  }
  const std::vector<RunResult> rows{RunResult{0, sc.seed, m}};
  write_text(dir / "runs.csv", runs_csv(rows));
  write_text(dir / "timing.csv", timing_csv(rows));
  std::printf("%s: %s, %zu agents, mode %s, T_1 %s s, T_mpc avg %.2f ms, %zu crossings -> %s\n",
              sc.map_name.empty() ? "scenario" : sc.map_name.c_str(), m.succ ? "success" : "failure",
              sc.agents.size(), to_string(opt.mode), detail::fixed(m.T_1, 1).c_str(), m.t_mpc.avg(), m.crossings,
              dir.string().c_str());
  if (!m.succ) std::printf("%s", postmortem(load_trace(dir / "trace.jsonl")).c_str());
  return m.succ ? kOk : kRunFailed;
}

int cmd_batch(const Common& c, std::size_t runs, unsigned parallel) {
  if (c.map.empty()) throw ParseError("--map is required");
  if (runs < 1) throw ParseError("--runs must be >= 1");
  BatchSpec spec;
  spec.map = resolve_map(c.map, c.strict_map);
  spec.map_name = c.map;
  spec.agents = c.agents;
  spec.runs = runs;
  spec.seed = c.seed;
  spec.config = make_config(c, {});
  spec.scenario = scenario_options(c);
  spec.sim = sim_options(c);
  spec.parallel = parallel;
  const auto results = run_batch(spec);
  const Summary s = summarize(results);
  const fs::path dir = out_dir(c);
  write_text(dir / "runs.csv", runs_csv(results));
  write_text(dir / "timing.csv", timing_csv(results));
  const std::string label = c.map + "/" + std::to_string(c.agents) + "/" + c.mode;
  const std::string table = summary_header() + "\n" + summary_line(label, s) + "\n";
  write_text(dir / "summary.txt", table);
  std::printf("%s", table.c_str());
  return s.succ_pct == 100.0 ? kOk : kRunFailed;
}

int cmd_plot(const std::string& trace, std::string out) {
  const Trace tr = load_trace(trace);
  if (out.empty()) out = fs::path(trace).replace_extension(".svg").string();
  write_text(out, plot_svg(tr));
  std::printf("%s\n", out.c_str());
  return kOk;
}

int cmd_postmortem(const std::string& trace) {
  std::printf("%s", postmortem(load_trace(trace)).c_str());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Claim-based multi-agent navigation simulator"};
  app.require_subcommand(1);

  Common run_opts;
  auto* run_cmd = app.add_subcommand("run", "Simulate one scenario and write its trace");
  add_common(run_cmd, run_opts);
  run_cmd->add_option("--scenario", run_opts.scenario, "Scenario JSON file instead of a generated one");

  Common batch_opts;
  std::size_t runs = 10;
  unsigned parallel = 1;
  auto* batch_cmd = app.add_subcommand("batch", "Simulate seeded scenarios and write runs.csv");
  add_common(batch_cmd, batch_opts);
  batch_cmd->add_option("--runs", runs, "Number of runs");
  batch_cmd->add_option("--parallel", parallel, "Worker threads")->check(CLI::PositiveNumber);

  std::string plot_trace, plot_out;
  auto* plot_cmd = app.add_subcommand("plot", "Render a trace as SVG");
  plot_cmd->add_option("trace", plot_trace, "trace.jsonl")->required();
  plot_cmd->add_option("--out", plot_out, "Output SVG (default: next to the trace)");

  std::string pm_trace;
  auto* pm_cmd = app.add_subcommand("postmortem", "Explain the outcome of a traced run");
  pm_cmd->add_option("trace", pm_trace, "trace.jsonl")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInvalid;
  }

  try {
    if (*run_cmd) return cmd_run(run_opts);
    if (*batch_cmd) return cmd_batch(batch_opts, runs, parallel);
    if (*plot_cmd) return cmd_plot(plot_trace, plot_out);
    if (*pm_cmd) return cmd_postmortem(pm_trace);
  } catch (const IoError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kIo;
  } catch (const ParseError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kInvalid;
  } catch (const ScenarioError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kInvalid;
  } catch (const TraceError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kInvalid;
  } catch (const MapError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kInvalid;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kInvalid;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kRunFailed;
  }
  return kInvalid;
}
