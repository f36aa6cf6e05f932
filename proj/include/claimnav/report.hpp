#pragma once

// Output formats and the batch runner: per-run CSVs, [min, avg, max]
// summary tables, line-delimited traces, SVG plots and postmortems.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "claimnav/map_io.hpp"
#include "claimnav/scenario.hpp"
#include "claimnav/simulator.hpp"

namespace claimnav {

class TraceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

/// Shortest text that reads back as the same double, NaN as empty.
inline std::string num(double v) {
  if (std::isnan(v)) return {};
  char buf[32];
  for (int prec = 6; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

inline std::string fixed(double v, int digits) {
  if (std::isnan(v)) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

inline std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  return out;
}

}  // namespace detail

// ------------------------------------------------------------------ seeds

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed of run `index` in a batch started from `base`.
inline std::uint64_t run_seed(std::uint64_t base, std::size_t index) {
  return splitmix64(base ^ splitmix64(static_cast<std::uint64_t>(index)));
}

// -------------------------------------------------------------- CSV files

struct RunResult {
  std::size_t index = 0;
  std::uint64_t seed = 0;
  Metrics metrics;
};

inline const std::vector<std::string>& runs_csv_columns() {
  static const std::vector<std::string> cols{
      "run",       "seed",      "agents",     "succ",      "inf",        "coll",
      "stall",     "timeout",   "inf_solves", "agent_collisions", "wall_collisions", "crossings",
      "coordinations", "avg_group", "T_1",     "T_1_min",   "T_1_max",    "sim_time"};
  return cols;
}

/// One row per run plus a final "all" row. Flags are 0/1 per run and
/// percentages in the aggregate row; counts are summed; T_1 columns hold
/// avg/min/max over completed runs. Only deterministic quantities appear.
inline std::string runs_csv(const std::vector<RunResult>& runs) {
  std::ostringstream out;
  const auto& cols = runs_csv_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << '\n';
  std::vector<Metrics> ms;
  std::size_t agents = 0, inf_solves = 0, agent_coll = 0, wall_coll = 0, crossings = 0, coords = 0, timeouts = 0;
  for (const auto& r : runs) {
    const Metrics& m = r.metrics;
    using detail::num;
    out << r.index << ',' << r.seed << ',' << m.agents << ',' << m.succ << ',' << m.inf << ',' << m.coll << ','
        << m.stall << ',' << m.timeout << ',' << m.infeasible_solves << ',' << m.agent_collisions << ','
        << m.wall_collisions << ',' << m.crossings << ',' << m.coordinations << ',' << num(m.avg_group) << ','
        << num(m.T_1) << ',' << num(m.T_1) << ',' << num(m.T_1) << ',' << num(m.sim_time) << '\n';
    ms.push_back(m);
    agents += m.agents;
    inf_solves += m.infeasible_solves;
    agent_coll += m.agent_collisions;
    wall_coll += m.wall_collisions;
    crossings += m.crossings;
    coords += m.coordinations;
    timeouts += m.timeout;
  }
  const Summary s = aggregate(ms);
  const double n = runs.empty() ? 1.0 : static_cast<double>(runs.size());
  double sim = 0.0;
  for (const auto& m : ms) sim += m.sim_time;
  using detail::num;
  const bool any = s.T_1.count > 0;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  out << "all," << ',' << num(static_cast<double>(agents) / n) << ',' << num(s.succ_pct) << ',' << num(s.inf_pct)
      << ',' << num(s.coll_pct) << ',' << num(s.stall_pct) << ',' << num(100.0 * static_cast<double>(timeouts) / n)
      << ',' << inf_solves << ',' << agent_coll << ',' << wall_coll << ',' << crossings << ',' << coords << ','
      << num(s.avg_group) << ',' << num(any ? s.T_1.avg() : nan) << ',' << num(any ? s.T_1.min : nan) << ','
      << num(any ? s.T_1.max : nan) << ',' << num(sim / n) << '\n';
  return out.str();
}

/// Wall-clock solve and cycle times, kept apart from runs.csv because they
/// differ between executions.
inline std::string timing_csv(const std::vector<RunResult>& runs) {
  std::ostringstream out;
  out << "run,solves,t_mpc_min,t_mpc_avg,t_mpc_max,t_total_min,t_total_avg,t_total_max\n";
  TimeStats mpc, total;
  auto row = [&](const std::string& name, const TimeStats& a, const TimeStats& b) {
    using detail::num;
    out << name << ',' << a.count << ',' << num(a.min) << ',' << num(a.avg()) << ',' << num(a.max) << ',' << num(b.min)
        << ',' << num(b.avg()) << ',' << num(b.max) << '\n';
  };
  for (const auto& r : runs) {
    row(std::to_string(r.index), r.metrics.t_mpc, r.metrics.t_total);
    mpc.merge(r.metrics.t_mpc);
    total.merge(r.metrics.t_total);
  }
  row("all", mpc, total);
  return out.str();
}

// ------------------------------------------------------------------ tables

inline std::string triple(const TimeStats& t, int digits) {
  if (!t.count) return "[-, -, -]";
  return "[" + detail::fixed(t.min, digits) + ", " + detail::fixed(t.avg(), digits) + ", " +
         detail::fixed(t.max, digits) + "]";
}

inline std::string summary_header() {
  return "class                runs  [succ, inf, coll] %    |F|   T_mpc [min, avg, max] ms    "
         "T_total [min, avg, max] ms  T_1 [min, avg, max] s";
}

inline std::string summary_line(const std::string& label, const Summary& s) {
  char buf[512];
  std::snprintf(buf, sizeof buf, "%-20s %4zu  [%3.0f, %3.0f, %3.0f]      %5.2f  %-26s  %-26s  %s", label.c_str(), s.runs,
                s.succ_pct, s.inf_pct, s.coll_pct, s.avg_group, triple(s.t_mpc, 2).c_str(),
                triple(s.t_total, 2).c_str(), triple(s.T_1, 1).c_str());
  return buf;
}

// ------------------------------------------------------------------ traces

/// Writes a run as JSON lines: a header with the map, then state, claim and
/// event records in time order, then the run metrics.
inline void write_trace(std::ostream& out, const Scenario& sc, Mode mode, const SimRecord& rec, const Metrics& m) {
  using nlohmann::json;
  json agents = json::array();
  for (const auto& a : sc.agents) {
    json route = json::array();
    for (AreaId id : a.route) route.push_back(id.value);
    agents.push_back({{"id", a.id.value}, {"route", route}, {"goal", detail::point_json(a.goal)}});
  }
  out << json{{"type", "header"},     {"map_name", sc.map_name}, {"map", map_to_json(sc.map, sc.map_name)},
              {"mode", to_string(mode)}, {"seed", sc.seed},        {"agents", agents}}
             .dump()
      << '\n';
  std::size_t ci = 0, ei = 0;
  auto flush_until = [&](double t) {
    for (; ci < rec.claims.size() && rec.claims[ci].t <= t; ++ci) {
      const auto& c = rec.claims[ci];
      json areas = json::array();
      for (AreaId id : c.areas) areas.push_back(id.value);
      out << json{{"type", "claim"}, {"t", c.t}, {"agent", c.agent}, {"first", c.first}, {"last", c.last}, {"areas", areas}}
                 .dump()
          << '\n';
    }
    for (; ei < rec.events.size() && rec.events[ei].t <= t; ++ei) {
      const auto& e = rec.events[ei];
      out << json{{"type", "event"}, {"t", e.t}, {"kind", to_string(e.kind)}, {"agent", e.agent}, {"other", e.other}}.dump()
          << '\n';
    }
  };
  for (const auto& f : rec.frames) {
    flush_until(f.t);
    for (std::size_t i = 0; i < f.agents.size(); ++i) {
      const auto& a = f.agents[i];
      json j{{"type", "state"},          {"t", f.t},
             {"agent", sc.agents[i].id.value}, {"x", a.state.position.x},
             {"y", a.state.position.y},  {"heading", a.state.heading},
             {"speed", a.state.speed},   {"accel", a.input.accel},
             {"yaw_rate", a.input.yaw_rate},   {"k_t", a.k_t},
             {"arrived", a.arrived}};
      j["status"] = a.status ? json(to_string(*a.status)) : json(nullptr);
      j["claim"] = a.claim ? json::array({a.claim->first, a.claim->second}) : json(nullptr);
      out << j.dump() << '\n';
    }
  }
  flush_until(std::numeric_limits<double>::infinity());
  out << json{{"type", "metrics"}, {"succ", m.succ}, {"inf", m.inf},     {"coll", m.coll},
              {"stall", m.stall},  {"timeout", m.timeout}, {"T_1", std::isnan(m.T_1) ? json(nullptr) : json(m.T_1)}}
             .dump()
      << '\n';
}

struct TraceAgent {
  int id = -1;
  std::vector<AreaId> route;
  Vec2 goal;
  std::vector<double> t;
  std::vector<AgentState> states;
};

struct Trace {
  SemanticMap map;
  std::string map_name;
  std::string mode;
  std::uint64_t seed = 0;
  std::vector<TraceAgent> agents;
  std::vector<Event> events;
  std::vector<ClaimChange> claims;
  std::optional<nlohmann::json> metrics;

  const TraceAgent* agent(int id) const {
    for (const auto& a : agents) {
      if (a.id == id) return &a;
    }
    return nullptr;
  }
  TraceAgent* agent(int id) { return const_cast<TraceAgent*>(std::as_const(*this).agent(id)); }
};

inline std::optional<EventKind> parse_event_kind(const std::string& s) {
  for (EventKind k : {EventKind::kCrossing, EventKind::kInfeasible, EventKind::kAgentCollision, EventKind::kWallCollision,
                      EventKind::kArrival, EventKind::kStall, EventKind::kTimeout}) {
    if (s == to_string(k)) return k;
  }
  return std::nullopt;
}

inline Trace read_trace(std::istream& in) {
  using nlohmann::json;
  Trace tr;
  std::string line;
  std::size_t lineno = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::string where = "trace line " + std::to_string(lineno);
    try {
      const json j = json::parse(line);
      const std::string type = j.at("type").get<std::string>();
      if (type == "header") {
        tr.map = map_from_json(j.at("map"), false);
        tr.map_name = j.value("map_name", "");
        tr.mode = j.at("mode").get<std::string>();
        tr.seed = j.at("seed").get<std::uint64_t>();
        for (const auto& a : j.at("agents")) {
          TraceAgent ta;
          ta.id = a.at("id").get<int>();
          for (const auto& id : a.at("route")) ta.route.push_back(AreaId{id.get<int>()});
          ta.goal = {a.at("goal").at(0).get<double>(), a.at("goal").at(1).get<double>()};
          tr.agents.push_back(std::move(ta));
        }
        header = true;
        continue;
      }
      if (!header) throw TraceError(where + ": record before header");
      if (type == "state") {
        TraceAgent* a = tr.agent(j.at("agent").get<int>());
        if (!a) throw TraceError(where + ": unknown agent");
        a->t.push_back(j.at("t").get<double>());
        a->states.push_back(AgentState{{j.at("x").get<double>(), j.at("y").get<double>()},
                                       j.at("heading").get<double>(),
                                       j.at("speed").get<double>()});
      } else if (type == "event") {
        const auto kind = parse_event_kind(j.at("kind").get<std::string>());
        if (!kind) throw TraceError(where + ": unknown event kind");
        tr.events.push_back(Event{j.at("t").get<double>(), *kind, j.at("agent").get<int>(), j.at("other").get<int>()});
      } else if (type == "claim") {
        ClaimChange c;
        c.t = j.at("t").get<double>();
        c.agent = j.at("agent").get<int>();
        c.first = j.at("first").get<std::size_t>();
        c.last = j.at("last").get<std::size_t>();
        for (const auto& id : j.at("areas")) c.areas.push_back(AreaId{id.get<int>()});
        tr.claims.push_back(std::move(c));
      } else if (type == "metrics") {
        tr.metrics = j;
      } else {
        throw TraceError(where + ": unknown record type " + type);
      }
    } catch (const TraceError&) {
      throw;
    } catch (const std::exception& e) {
      throw TraceError(where + ": " + e.what());
    }
  }
  if (!header) throw TraceError("trace has no header");
  return tr;
}

inline Trace load_trace(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open trace " + path.string());
  return read_trace(in);
}

// -------------------------------------------------------------------- plots

inline const char* agent_color(std::size_t i) {
  static const char* palette[] = {"#d62728", "#1f77b4", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b",
                                  "#e377c2", "#17becf", "#bcbd22", "#7f7f7f", "#393b79", "#637939"};
  return palette[i % (sizeof palette / sizeof palette[0])];
}

/// SVG with the areas, physical walls, dashed interfaces, one polyline per
/// agent and a marker wherever an agent's claim changed.
inline std::string plot_svg(const Trace& tr) {
  double lo_x = 1e300, lo_y = 1e300, hi_x = -1e300, hi_y = -1e300;
  for (const auto& a : tr.map.areas()) {
    for (Vec2 v : a.polygon) {
      lo_x = std::min(lo_x, v.x);
      lo_y = std::min(lo_y, v.y);
      hi_x = std::max(hi_x, v.x);
      hi_y = std::max(hi_y, v.y);
    }
  }
  if (lo_x > hi_x) lo_x = lo_y = 0.0, hi_x = hi_y = 1.0;
  const double pad = 0.3, scale = 100.0;
  const double w = (hi_x - lo_x + 2 * pad) * scale, h = (hi_y - lo_y + 2 * pad) * scale;
  auto X = [&](double x) { return detail::fixed((x - lo_x + pad) * scale, 1); };
  auto Y = [&](double y) { return detail::fixed((hi_y - y + pad) * scale, 1); };
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << detail::fixed(w, 0) << "\" height=\"" << detail::fixed(h, 0)
    << "\" viewBox=\"0 0 " << detail::fixed(w, 1) << ' ' << detail::fixed(h, 1) << "\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n<g id=\"areas\">\n";
  for (const auto& a : tr.map.areas()) {
    s << "<polygon fill=\"#e6e6e6\" stroke=\"#c8c8c8\" stroke-width=\"1\" points=\"";
    for (Vec2 v : a.polygon) s << X(v.x) << ',' << Y(v.y) << ' ';
    s << "\"><title>" << a.name << "</title></polygon>\n";
  }
  s << "</g>\n<g id=\"walls\" stroke=\"black\" stroke-width=\"3\">\n";
  for (const auto& b : tr.map.boundaries()) {
    for (const auto& seg : b.segments) {
      s << "<line x1=\"" << X(seg.a.x) << "\" y1=\"" << Y(seg.a.y) << "\" x2=\"" << X(seg.b.x) << "\" y2=\""
        << Y(seg.b.y) << "\"/>\n";
    }
  }
  s << "</g>\n<g id=\"interfaces\" stroke=\"#555555\" stroke-width=\"1.5\" stroke-dasharray=\"6,4\">\n";
  for (const auto& i : tr.map.interfaces()) {
    s << "<line x1=\"" << X(i.segment.a.x) << "\" y1=\"" << Y(i.segment.a.y) << "\" x2=\"" << X(i.segment.b.x)
      << "\" y2=\"" << Y(i.segment.b.y) << "\"/>\n";
  }
  s << "</g>\n";
  for (std::size_t k = 0; k < tr.agents.size(); ++k) {
    const auto& a = tr.agents[k];
    const char* col = agent_color(k);
    s << "<g id=\"agent" << a.id << "\" stroke=\"" << col << "\" fill=\"" << col << "\">\n";
    if (!a.states.empty()) {
      s << "<polyline class=\"trajectory\" fill=\"none\" stroke-width=\"2\" points=\"";
      for (const auto& x : a.states) s << X(x.position.x) << ',' << Y(x.position.y) << ' ';
      s << "\"/>\n";
      s << "<circle class=\"start\" r=\"5\" cx=\"" << X(a.states.front().position.x) << "\" cy=\""
        << Y(a.states.front().position.y) << "\"/>\n";
    }
    s << "<path class=\"goal\" fill=\"none\" stroke-width=\"2\" d=\"M" << X(a.goal.x - 0.08) << ',' << Y(a.goal.y - 0.08)
      << " L" << X(a.goal.x + 0.08) << ',' << Y(a.goal.y + 0.08) << " M" << X(a.goal.x - 0.08) << ','
      << Y(a.goal.y + 0.08) << " L" << X(a.goal.x + 0.08) << ',' << Y(a.goal.y - 0.08) << "\"/>\n";
    for (const auto& c : tr.claims) {
      if (c.agent != a.id || a.states.empty()) continue;
      const auto it = std::lower_bound(a.t.begin(), a.t.end(), c.t - 1e-9);
      const auto& p = a.states[std::min<std::size_t>(it - a.t.begin(), a.states.size() - 1)].position;
      s << "<rect class=\"claim\" fill=\"white\" stroke-width=\"1.5\" x=\"" << detail::fixed((p.x - lo_x + pad) * scale - 4, 1)
        << "\" y=\"" << detail::fixed((hi_y - p.y + pad) * scale - 4, 1) << "\" width=\"8\" height=\"8\"><title>t="
        << detail::fixed(c.t, 1) << " claim [" << c.first << ", " << c.last << "]</title></rect>\n";
    }
    s << "</g>\n";
  }
  s << "</svg>\n";
  return s.str();
}

// -------------------------------------------------------------- postmortem

/// Plain-text account of a trace: outcome, per-agent progress and the
/// events that ended the run.
inline std::string postmortem(const Trace& tr) {
  std::ostringstream s;
  s << "map " << (tr.map_name.empty() ? "(unnamed)" : tr.map_name) << ", mode " << tr.mode << ", seed " << tr.seed
    << ", " << tr.agents.size() << " agents\n";
  if (tr.metrics) {
    const auto& m = *tr.metrics;
    s << "outcome: " << (m.value("succ", false) ? "success" : "failure");
    for (const char* k : {"inf", "coll", "stall", "timeout"}) {
      if (m.value(k, false)) s << ' ' << k;
    }
    if (m.contains("T_1") && m["T_1"].is_number()) s << ", T_1 " << detail::fixed(m["T_1"].get<double>(), 1) << " s";
    s << '\n';
  } else {
    s << "outcome: unknown (trace has no metrics record)\n";
  }
  for (const auto& a : tr.agents) {
    std::size_t crossings = 0;
    std::optional<double> arrival;
    for (const auto& e : tr.events) {
      if (e.agent != a.id) continue;
      if (e.kind == EventKind::kCrossing) ++crossings;
      if (e.kind == EventKind::kArrival) arrival = e.t;
    }
    s << "agent " << a.id << ": step " << std::min(crossings, a.route.size() - 1) << "/" << a.route.size() - 1 << " of route";
    for (AreaId id : a.route) s << ' ' << (tr.map.has_area(id) ? tr.map.area(id).name : std::to_string(id.value));
    if (arrival) s << ", arrived at " << detail::fixed(*arrival, 1) << " s";
    if (!a.states.empty()) {
      const auto& x = a.states.back();
      s << ", last at (" << detail::fixed(x.position.x, 2) << ", " << detail::fixed(x.position.y, 2) << ") speed "
        << detail::fixed(x.speed, 2);
    }
    const ClaimChange* last = nullptr;
    for (const auto& c : tr.claims) {
      if (c.agent == a.id) last = &c;
    }
    if (last) s << ", claim [" << last->first << ", " << last->last << "]";
    s << '\n';
  }
  std::size_t shown = 0;
  for (const auto& e : tr.events) {
    if (e.kind == EventKind::kCrossing || e.kind == EventKind::kArrival) continue;
    if (shown++ == 0) s << "events:\n";
    s << "  t=" << detail::fixed(e.t, 1) << ' ' << to_string(e.kind) << " agent " << e.agent;
    if (e.other >= 0) s << (e.kind == EventKind::kAgentCollision ? " with agent " : " other ") << e.other;
    s << '\n';
  }
  if (!shown) s << "no failure events\n";
  return s.str();
}

// ------------------------------------------------------------------ batch

struct BatchSpec {
  SemanticMap map;
  std::string map_name;
  std::size_t agents = 3;
  std::size_t runs = 1;
  std::uint64_t seed = 1;
  MPCConfig config;
  ScenarioOptions scenario;
  SimOptions sim;
  unsigned parallel = 1;
};

/// Runs generated scenarios, `parallel` at a time. Results come back in run
/// order whatever the thread count.
inline std::vector<RunResult> run_batch(const BatchSpec& spec) {
  std::vector<RunResult> out(spec.runs);
  std::atomic<std::size_t> next{0};
  std::mutex err_mu;
  std::exception_ptr err;
  SimOptions sim = spec.sim;
  sim.record_frames = false;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next++;
      if (i >= spec.runs) return;
      try {
        const std::uint64_t seed = run_seed(spec.seed, i);
        const Scenario sc = generate_scenario(spec.map, spec.agents, seed, spec.config, spec.scenario, spec.map_name);
        out[i] = RunResult{i, seed, run(sc, sim).second};
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mu);
        if (!err) err = std::current_exception();
        next = spec.runs;
      }
    }
  };
  const unsigned n = std::max(1u, std::min<unsigned>(spec.parallel, static_cast<unsigned>(spec.runs)));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < n; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (err) std::rethrow_exception(err);
  return out;
}

inline Summary summarize(const std::vector<RunResult>& runs) {
  std::vector<Metrics> ms;
  for (const auto& r : runs) ms.push_back(r.metrics);
  return aggregate(ms);
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  auto out = detail::open_out(path);
  out << text;
  if (!out) throw IoError("cannot write " + path.string());
}

}  // namespace claimnav
