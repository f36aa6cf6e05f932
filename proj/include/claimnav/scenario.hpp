#pragma once
// Scenarios: agents with start poses, goals and area routes on one map, plus
// the MPC configuration they run with. Includes random generation and JSON
// round-tripping of scenarios and configs.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <queue>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "claimnav/claim_policy.hpp"
#include "claimnav/map_io.hpp"
#include "claimnav/maps.hpp"
#include "claimnav/mpc.hpp"

namespace claimnav {

class ScenarioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct AgentSpec {
  AgentId id;
  AgentState start;
  Vec2 goal;
  std::vector<AreaId> route;  // start area first, goal area last

  AreaId start_area() const { return route.front(); }
  AreaId goal_area() const { return route.back(); }
};

struct Scenario {
  SemanticMap map;
  std::string map_name;
  std::vector<AgentSpec> agents;
  MPCConfig config;
  std::uint64_t seed = 0;
  double max_sim_time = 120.0;  // s
};

// ----------------------------------------------------------------- config

namespace detail {

using ConfigField = std::variant<int MPCConfig::*, double MPCConfig::*, bool MPCConfig::*>;

inline const std::vector<std::pair<const char*, ConfigField>>& config_fields() {
  static const std::vector<std::pair<const char*, ConfigField>> fields{
      {"N_t", &MPCConfig::N_t},
      {"dt", &MPCConfig::dt},
      {"v_min", &MPCConfig::v_min},
      {"v_max", &MPCConfig::v_max},
      {"a_min", &MPCConfig::a_min},
      {"a_max", &MPCConfig::a_max},
      {"omega_min", &MPCConfig::omega_min},
      {"omega_max", &MPCConfig::omega_max},
      {"r_v", &MPCConfig::r_v},
      {"r_soft", &MPCConfig::r_soft},
      {"soft_radius_in_walls", &MPCConfig::soft_radius_in_walls},
      {"N_h", &MPCConfig::N_h},
      {"f", &MPCConfig::f},
      {"max_cpu_time", &MPCConfig::max_cpu_time},
      {"w_pos", &MPCConfig::w_pos},
      {"w_term", &MPCConfig::w_term},
      {"w_accel", &MPCConfig::w_accel},
      {"w_yaw", &MPCConfig::w_yaw},
      {"w_speed", &MPCConfig::w_speed},
      {"w_head", &MPCConfig::w_head},
      {"head_softening", &MPCConfig::head_softening},
      {"rk4", &MPCConfig::rk4},
      {"max_inner", &MPCConfig::max_inner},
      {"max_penalty_rounds", &MPCConfig::max_penalty_rounds},
      {"max_evaluations", &MPCConfig::max_evaluations},
      {"penalty_init", &MPCConfig::penalty_init},
      {"barrier_init", &MPCConfig::barrier_init},
      {"barrier_warm", &MPCConfig::barrier_warm},
      {"barrier_min", &MPCConfig::barrier_min},
      {"barrier_decrease", &MPCConfig::barrier_decrease},
      {"terminal_rest", &MPCConfig::terminal_rest},
      {"rest_tol", &MPCConfig::rest_tol},
      {"feasibility_tol", &MPCConfig::feasibility_tol},
      {"optimality_tol", &MPCConfig::optimality_tol},
      {"infeasible_tol", &MPCConfig::infeasible_tol},
      {"radius_margin", &MPCConfig::radius_margin},
      {"target_depth", &MPCConfig::target_depth},
      {"approach_depth", &MPCConfig::approach_depth},
  };
  return fields;
}

inline const ConfigField* find_field(const std::string& name) {
  for (const auto& [n, f] : config_fields()) {
    if (name == n) return &f;
  }
  return nullptr;
}

inline void set_field(MPCConfig& c, const std::string& name, const nlohmann::json& v) {
  const ConfigField* f = find_field(name);
  if (!f) throw ParseError("unknown config field " + name);
  std::visit(
      [&](auto member) {
        using T = std::remove_reference_t<decltype(c.*member)>;
        if constexpr (std::is_same_v<T, bool>) {
          if (!v.is_boolean()) throw ParseError("config field " + name + " must be a boolean");
          c.*member = v.get<bool>();
        } else if constexpr (std::is_same_v<T, int>) {
          if (!v.is_number_integer()) throw ParseError("config field " + name + " must be an integer");
          c.*member = v.get<int>();
        } else {
          if (!v.is_number()) throw ParseError("config field " + name + " must be a number");
          c.*member = v.get<double>();
        }
      },
      *f);
}

}  // namespace detail

inline nlohmann::json config_to_json(const MPCConfig& c) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [name, f] : detail::config_fields()) {
    std::visit([&](auto member) { j[name] = c.*member; }, f);
  }
  return j;
}

/// Fields missing from `j` keep their value in `base`. Unknown keys and
/// type mismatches throw ParseError; the result is validated.
inline MPCConfig config_from_json(const nlohmann::json& j, MPCConfig base = {}) {
  if (!j.is_object()) throw ParseError("config must be an object");
  for (const auto& [k, v] : j.items()) detail::set_field(base, k, v);
  base.validate();
  return base;
}

/// Applies "name=value". The value is parsed as JSON, so "true", "3" and
/// "0.25" all work. Does not validate.
inline void apply_override(MPCConfig& c, const std::string& kv) {
  const auto eq = kv.find('=');
  if (eq == std::string::npos || eq == 0) throw ParseError("override must look like name=value: " + kv);
  const std::string name = kv.substr(0, eq);
  nlohmann::json v;
  try {
    v = nlohmann::json::parse(kv.substr(eq + 1));
  } catch (const nlohmann::json::exception&) {
    throw ParseError("override " + name + ": cannot parse value '" + kv.substr(eq + 1) + "'");
  }
  detail::set_field(c, name, v);
}

// ----------------------------------------------------------------- routes

namespace detail {

inline double hop_length(const SemanticMap& map, AreaId a, const Interface& itf, AreaId b) {
  const Vec2 mid = (itf.segment.a + itf.segment.b) * 0.5;
  return distance(centroid(map.area(a).polygon), mid) + distance(mid, centroid(map.area(b).polygon));
}

/// Dijkstra distances to `to` over two-sided interfaces.
inline std::map<AreaId, double> distances_to(const SemanticMap& map, AreaId to) {
  std::map<AreaId, double> dist;
  using Item = std::pair<double, AreaId>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> open;
  dist[to] = 0.0;
  open.emplace(0.0, to);
  while (!open.empty()) {
    auto [d, a] = open.top();
    open.pop();
    if (d > dist[a]) continue;
    for (InterfaceId iid : map.interfaces_of(a)) {
      const Interface& itf = map.interface(iid);
      if (itf.connects.size() != 2) continue;
      const AreaId b = itf.connects[0] == a ? itf.connects[1] : itf.connects[0];
      const double nd = d + hop_length(map, a, itf, b);
      auto it = dist.find(b);
      if (it == dist.end() || nd < it->second) {
        dist[b] = nd;
        open.emplace(nd, b);
      }
    }
  }
  return dist;
}

}  // namespace detail

/// Shortest route between two areas over the interface graph, weighted by
/// centroid -> interface midpoint -> centroid distance. Among equally short
/// routes, `rng` picks uniformly at each step; without it the lowest area id
/// wins. Empty when unreachable.
inline std::vector<AreaId> shortest_route(const SemanticMap& map, AreaId from, AreaId to,
                                          std::mt19937_64* rng = nullptr) {
  const auto dist = detail::distances_to(map, to);
  if (!dist.contains(from)) return {};
  std::vector<AreaId> out{from};
  while (out.back() != to) {
    const AreaId a = out.back();
    const double da = dist.at(a);
    std::vector<AreaId> best;
    for (InterfaceId iid : map.interfaces_of(a)) {
      const Interface& itf = map.interface(iid);
      if (itf.connects.size() != 2) continue;
      const AreaId b = itf.connects[0] == a ? itf.connects[1] : itf.connects[0];
      auto it = dist.find(b);
      if (it == dist.end() || it->second >= da) continue;
      if (std::abs(it->second + detail::hop_length(map, a, itf, b) - da) <= 1e-9 * (1.0 + da)) best.push_back(b);
    }
    std::sort(best.begin(), best.end());
    best.erase(std::unique(best.begin(), best.end()), best.end());
    if (best.empty()) return {};
    const std::size_t pick = rng ? std::uniform_int_distribution<std::size_t>(0, best.size() - 1)(*rng) : 0;
    out.push_back(best[pick]);
  }
  return out;
}

inline std::vector<Route> routes_of(const Scenario& s) {
  std::vector<Route> out;
  for (const auto& a : s.agents) out.push_back(Route{a.id, a.route, 0});
  return out;
}

/// The assumptions a scenario's routes must satisfy: non-empty, contiguous
/// through interfaces, distinct start areas, distinct final areas, and a
/// joint completion from the start. With `sequential_only` the completion
/// must be one agent after another, which is cheap to decide and implies
/// the general case.
inline bool routes_admissible(const SemanticMap& map, std::span<const Route> routes, bool sequential_only = false,
                              std::size_t max_states = 20000) {
  AreaSet starts, finals;
  for (const Route& r : routes) {
    if (r.areas.empty()) return false;
    for (std::size_t k = 0; k + 1 < r.areas.size(); ++k) {
      if (map.interfaces_between(r.areas[k], r.areas[k + 1]).empty()) return false;
    }
    if (!starts.insert(r.areas.front()) || !finals.insert(r.areas.back())) return false;
  }
  const std::vector<std::size_t> pos(routes.size(), 0);
  if (sequential_only) return sequential_order(map, routes, pos).has_value();
  return can_complete(map, routes, pos, max_states);
}

// ------------------------------------------------------------- generation

struct ScenarioOptions {
  int max_attempts = 2000;
  /// Start and goal areas must allow this much clearance somewhere inside;
  /// keeps agents out of corridors and other narrow passages.
  double min_area_clearance = 0.4;
  bool prefer_dead_ends = true;
  /// Extra clearance of start and goal points beyond the wall radius.
  double pose_margin = 0.05;
  /// Accept only routes the agents can finish one after another. Off runs
  /// the full joint search, which can be slow on crowded maps.
  bool sequential_only = true;
  std::size_t max_search_states = 20000;
  double max_sim_time = 120.0;
  /// Goals are drawn among areas whose shortest route has at most this many
  /// areas; 0 means any area.
  std::size_t max_route_areas = 0;
};

namespace detail {

/// Largest inner clearance over a coarse grid of the polygon's bounding box.
inline double max_clearance(const Polygon& poly) {
  double lo_x = poly[0].x, hi_x = poly[0].x, lo_y = poly[0].y, hi_y = poly[0].y;
  for (Vec2 v : poly) {
    lo_x = std::min(lo_x, v.x);
    hi_x = std::max(hi_x, v.x);
    lo_y = std::min(lo_y, v.y);
    hi_y = std::max(hi_y, v.y);
  }
  double best = 0.0;
  for (int i = 0; i <= 20; ++i) {
    for (int j = 0; j <= 20; ++j) {
      const Vec2 p{lo_x + (hi_x - lo_x) * i / 20.0, lo_y + (hi_y - lo_y) * j / 20.0};
      best = std::max(best, inner_clearance(poly, p));
    }
  }
  return best;
}

inline std::optional<Vec2> sample_point(const Polygon& poly, double clearance, std::mt19937_64& rng) {
  double lo_x = poly[0].x, hi_x = poly[0].x, lo_y = poly[0].y, hi_y = poly[0].y;
  for (Vec2 v : poly) {
    lo_x = std::min(lo_x, v.x);
    hi_x = std::max(hi_x, v.x);
    lo_y = std::min(lo_y, v.y);
    hi_y = std::max(hi_y, v.y);
  }
  std::uniform_real_distribution<double> ux(lo_x, hi_x), uy(lo_y, hi_y);
  for (int t = 0; t < 200; ++t) {
    const Vec2 p{ux(rng), uy(rng)};
    if (inner_clearance(poly, p) >= clearance) return p;
  }
  return std::nullopt;
}

}  // namespace detail

/// Top-level areas roomy enough to start or finish in, ascending. With
/// `prefer_dead_ends`, only areas with a single neighbour are used when there
/// are at least `n_agents` of them, so that no route runs through another
/// agent's start or goal.
inline std::vector<AreaId> spawn_areas(const SemanticMap& map, double min_clearance, bool prefer_dead_ends = false,
                                       std::size_t n_agents = 0) {
  std::vector<AreaId> roomy, dead_ends;
  for (AreaId a : map.top_level_areas()) {
    if (detail::max_clearance(map.area(a).polygon) < min_clearance) continue;
    roomy.push_back(a);
    if (map.neighbors(a).size() <= 1) dead_ends.push_back(a);
  }
  return prefer_dead_ends && dead_ends.size() >= n_agents ? dead_ends : roomy;
}

/// Random starts and goals in distinct areas with shortest routes, resampled
/// until the routes admit a joint completion. Deterministic in `seed`.
inline Scenario generate_scenario(const SemanticMap& map, std::size_t n_agents, std::uint64_t seed,
                                  const MPCConfig& config = {}, const ScenarioOptions& opt = {},
                                  const std::string& map_name = {}) {
  config.validate();
  const auto candidates = spawn_areas(map, opt.min_area_clearance, opt.prefer_dead_ends, n_agents);
  if (n_agents > candidates.size()) {
    throw ScenarioError("map has " + std::to_string(candidates.size()) + " usable areas, " +
                        std::to_string(n_agents) + " agents requested");
  }
  Scenario s{map, map_name, {}, config, seed, opt.max_sim_time};
  if (n_agents == 0) return s;
  std::mt19937_64 rng(seed);
  const double clearance = config.wall_radius() + opt.pose_margin;
  std::uniform_real_distribution<double> heading(-M_PI, M_PI);
  std::map<AreaId, std::set<AreaId>> within;
  if (opt.max_route_areas > 0) {
    for (AreaId a : candidates) {
      for (AreaId b : candidates) {
        if (a != b && shortest_route(map, a, b).size() <= opt.max_route_areas) within[a].insert(b);
      }
    }
  }
  for (int attempt = 0; attempt < opt.max_attempts; ++attempt) {
    std::vector<AreaId> starts = candidates, goals = candidates;
    std::shuffle(starts.begin(), starts.end(), rng);
    starts.resize(n_agents);
    bool ok = true;
    std::vector<Route> routes;
    if (opt.max_route_areas == 0) {
      std::shuffle(goals.begin(), goals.end(), rng);
      goals.resize(n_agents);
    } else {
      // Each agent draws from the goals still free within reach.
      std::vector<AreaId> picked;
      for (std::size_t i = 0; i < n_agents && ok; ++i) {
        std::vector<AreaId> near;
        for (AreaId g : goals) {
          if (g == starts[i] || std::find(picked.begin(), picked.end(), g) != picked.end()) continue;
          if (within[starts[i]].count(g)) near.push_back(g);
        }
        if (near.empty()) {
          ok = false;
          break;
        }
        picked.push_back(near[std::uniform_int_distribution<std::size_t>(0, near.size() - 1)(rng)]);
      }
      goals = std::move(picked);
    }
    for (std::size_t i = 0; i < n_agents && ok; ++i) {
      if (starts[i] == goals[i]) {
        ok = false;
        break;
      }
      auto path = shortest_route(map, starts[i], goals[i], &rng);
      ok = !path.empty() && (opt.max_route_areas == 0 || path.size() <= opt.max_route_areas);
      routes.push_back(Route{AgentId{static_cast<int>(i)}, std::move(path), 0});
    }
    if (!ok || !routes_admissible(map, routes, opt.sequential_only, opt.max_search_states)) continue;
    s.agents.clear();
    for (std::size_t i = 0; i < n_agents && ok; ++i) {
      const auto p = detail::sample_point(map.area(starts[i]).polygon, clearance, rng);
      const auto g = detail::sample_point(map.area(goals[i]).polygon, clearance, rng);
      if (!p || !g) {
        ok = false;
        break;
      }
      s.agents.push_back(AgentSpec{routes[i].agent, AgentState{*p, heading(rng), 0.0}, *g, routes[i].areas});
    }
    if (ok) return s;
  }
  throw ScenarioError("no admissible scenario after " + std::to_string(opt.max_attempts) + " attempts");
}

// --------------------------------------------------------------- bundled

/// Names of the maps shipped in maps/.
inline std::vector<std::string> bundled_map_names() { return {"corridor", "tjunction", "lanes", "grid3", "grid4", "warehouse"}; }

inline std::filesystem::path maps_dir() {
  if (const char* env = std::getenv("CLAIMNAV_MAPS")) return env;
#ifdef CLAIMNAV_MAPS_DIR
  return CLAIMNAV_MAPS_DIR;
#else
  return "maps";
#endif
}

/// Built-in map by name, without touching the file system.
inline std::optional<SemanticMap> builtin_map(const std::string& name) {
  if (name == "corridor") return make_corridor();
  if (name == "tjunction") return make_tjunction();
  if (name == "lanes") return make_lanes();
  auto grid = [](int cols, int rows) {
    RoomGridOptions o;
    o.cols = cols;
    o.rows = rows;
    return make_room_grid(o);
  };
  if (name == "grid3") return grid(3, 3);
  if (name == "grid4") return grid(4, 4);
  if (name == "warehouse") return make_warehouse(WarehouseOptions{});
  // "gridCxR": C columns, R rows of rooms.
  int cols = 0, rows = 0;
  char tail = 0;
  if (std::sscanf(name.c_str(), "grid%dx%d%c", &cols, &rows, &tail) == 2 && cols > 0 && rows > 0 && cols * rows <= 400) {
    return grid(cols, rows);
  }
  // "warehouseCxR": C columns, R rows of hubs.
  if (std::sscanf(name.c_str(), "warehouse%dx%d%c", &cols, &rows, &tail) == 2 && cols > 0 && rows > 0 &&
      cols * rows <= 400) {
    WarehouseOptions o;
    o.cols = cols;
    o.rows = rows;
    return make_warehouse(o);
  }
  return std::nullopt;
}

/// A path to a JSON file, or the name of a bundled map.
inline SemanticMap resolve_map(const std::string& name_or_path, bool strict = true) {
  const std::filesystem::path p(name_or_path);
  if (std::filesystem::exists(p) || p.has_extension() || p.has_parent_path()) return load_map(p, strict);
  const auto bundled = maps_dir() / (name_or_path + ".json");
  if (std::filesystem::exists(bundled)) return load_map(bundled, strict);
  if (auto m = builtin_map(name_or_path)) return *m;
  throw IoError("cannot open map " + name_or_path);
}

// ------------------------------------------------------------------- JSON

inline nlohmann::json scenario_to_json(const Scenario& s) {
  using nlohmann::json;
  json agents = json::array();
  for (const auto& a : s.agents) {
    json route = json::array();
    for (AreaId id : a.route) route.push_back(id.value);
    agents.push_back({{"id", a.id.value},
                      {"start", {a.start.position.x, a.start.position.y}},
                      {"heading", a.start.heading},
                      {"speed", a.start.speed},
                      {"goal", {a.goal.x, a.goal.y}},
                      {"route", route}});
  }
  return {{"map", s.map_name},
          {"seed", s.seed},
          {"max_sim_time", s.max_sim_time},
          {"config", config_to_json(s.config)},
          {"agents", agents}};
}

/// `map` is used when given; otherwise the "map" entry is resolved as a name
/// or path. Routes are taken as written when present, else computed.
inline Scenario scenario_from_json(const nlohmann::json& j, const SemanticMap* map = nullptr, bool strict = true) {
  using detail::require;
  if (!j.is_object()) throw ParseError("scenario must be an object");
  detail::check_keys(j, {"map", "seed", "max_sim_time", "config", "agents"}, "scenario", strict);
  Scenario s;
  if (j.contains("map")) {
    if (!j["map"].is_string()) throw ParseError("scenario.map must be a string");
    s.map_name = j["map"].get<std::string>();
  }
  if (map) {
    s.map = *map;
  } else if (!s.map_name.empty()) {
    s.map = resolve_map(s.map_name, strict);
  } else {
    throw ParseError("scenario.map missing");
  }
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned()) throw ParseError("scenario.seed must be a non-negative integer");
    s.seed = j["seed"].get<std::uint64_t>();
  }
  if (j.contains("max_sim_time")) s.max_sim_time = detail::as_number(j["max_sim_time"], "scenario.max_sim_time");
  if (!(s.max_sim_time > 0)) throw ParseError("scenario.max_sim_time must be > 0");
  if (j.contains("config")) s.config = config_from_json(j["config"]);
  const auto& agents = require(j, "agents", "scenario");
  if (!agents.is_array()) throw ParseError("scenario.agents must be an array");
  for (std::size_t i = 0; i < agents.size(); ++i) {
    const auto& a = agents[i];
    const std::string where = "scenario.agents[" + std::to_string(i) + "]";
    if (!a.is_object()) throw ParseError(where + " must be an object");
    detail::check_keys(a, {"id", "start", "heading", "speed", "goal", "route", "goal_area"}, where, strict);
    AgentSpec spec;
    spec.id = AgentId{a.contains("id") ? detail::as_int(a["id"], where + ".id") : static_cast<int>(i)};
    spec.start.position = detail::as_point(require(a, "start", where), where + ".start");
    if (a.contains("heading")) spec.start.heading = wrap_angle(detail::as_number(a["heading"], where + ".heading"));
    if (a.contains("speed")) spec.start.speed = detail::as_number(a["speed"], where + ".speed");
    spec.goal = detail::as_point(require(a, "goal", where), where + ".goal");
    if (a.contains("route")) {
      if (!a["route"].is_array() || a["route"].empty()) throw ParseError(where + ".route must be a non-empty array");
      for (const auto& id : a["route"]) {
        const AreaId area{detail::as_int(id, where + ".route")};
        if (!s.map.has_area(area)) throw ParseError(where + ".route: unknown area " + std::to_string(area.value));
        spec.route.push_back(area);
      }
    } else {
      const auto from = s.map.point_in_area(spec.start.position);
      std::optional<AreaId> to;
      if (a.contains("goal_area")) {
        to = AreaId{detail::as_int(a["goal_area"], where + ".goal_area")};
      } else {
        const auto hits = s.map.point_in_area(spec.goal);
        if (!hits.empty()) to = hits.front();
      }
      if (from.empty() || !to) throw ParseError(where + ": start or goal lies outside the map");
      spec.route = shortest_route(s.map, from.front(), *to);
      if (spec.route.empty()) throw ParseError(where + ": goal unreachable");
    }
    if (!s.map.area_contains(spec.route.front(), spec.start.position)) {
      throw ParseError(where + ": start outside its start area");
    }
    for (std::size_t k = 0; k + 1 < spec.route.size(); ++k) {
      if (s.map.interfaces_between(spec.route[k], spec.route[k + 1]).empty()) {
        throw ParseError(where + ".route: areas " + std::to_string(spec.route[k].value) + " and " +
                         std::to_string(spec.route[k + 1].value) + " are not adjacent");
      }
    }
    if (!s.map.area_contains(spec.route.back(), spec.goal)) throw ParseError(where + ": goal outside its final area");
    for (const auto& b : s.map.boundaries()) {
      for (const auto& seg : b.segments) {
        if (point_segment_distance(spec.start.position, seg) < s.config.r_v) {
          throw ScenarioError(where + ": start closer than r_v to a wall");
        }
      }
    }
    s.agents.push_back(std::move(spec));
  }
  for (std::size_t i = 0; i < s.agents.size(); ++i) {
    for (std::size_t j = i + 1; j < s.agents.size(); ++j) {
      if (s.agents[i].route.front() == s.agents[j].route.front() || s.agents[i].route.back() == s.agents[j].route.back()) {
        throw ScenarioError("scenario agents " + std::to_string(i) + " and " + std::to_string(j) +
                            " share a start or final area");
      }
    }
  }
  return s;
}

inline Scenario load_scenario(const std::filesystem::path& path, const SemanticMap* map = nullptr,
                              bool strict = true) {
  return scenario_from_json(read_json_file(path), map, strict);
}

inline void save_scenario(const Scenario& s, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << scenario_to_json(s).dump(2) << "\n";
}

}  // namespace claimnav
