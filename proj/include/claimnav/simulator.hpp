#pragma once
// Closed-loop simulation. Every control period each agent builds its MPC
// problem from the current claims, solves it and applies the first input to
// a perfect-model plant; interface crossings trigger re-coordination.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "claimnav/coordination.hpp"
#include "claimnav/mpc.hpp"
#include "claimnav/scenario.hpp"

namespace claimnav {

enum class Mode { kClaims, kNever };

inline const char* to_string(Mode m) { return m == Mode::kClaims ? "claims" : "never"; }

inline std::optional<Mode> parse_mode(const std::string& s) {
  if (s == "claims") return Mode::kClaims;
  if (s == "never") return Mode::kNever;
  return std::nullopt;
}

struct SimOptions {
  Mode mode = Mode::kClaims;
  double arrive_tol = 0.15;      // m from the goal point
  double arrive_speed = 0.1;     // m/s
  double crossing_margin = 0.02; // beyond the wall radius, see detect_interface_crossing
  double stall_speed = 1e-3;     // m/s
  double stall_time = 10.0;      // s
  bool stop_on_collision = true;
  double plant_noise = 0.0;  // std dev of additive position noise per step, m
  bool record_frames = true;
  ClaimPolicyOptions policy;
};

enum class EventKind { kCrossing, kInfeasible, kAgentCollision, kWallCollision, kArrival, kStall, kTimeout };

inline const char* to_string(EventKind k) {
  switch (k) {
    case EventKind::kCrossing: return "crossing";
    case EventKind::kInfeasible: return "inf";
    case EventKind::kAgentCollision: return "agent_collision";
    case EventKind::kWallCollision: return "wall_collision";
    case EventKind::kArrival: return "arrival";
    case EventKind::kStall: return "stall";
    case EventKind::kTimeout: return "timeout";
  }
  return "?";
}

struct Event {
  double t = 0.0;
  EventKind kind = EventKind::kCrossing;
  int agent = -1;
  int other = -1;  // agent, boundary or interface id depending on kind
};

struct AgentFrame {
  AgentState state;
  ControlInput input;
  std::optional<SolveStatus> status;  // empty when no solve ran
  double solve_ms = 0.0;
  int evaluations = 0;
  std::size_t k_t = 0;
  std::optional<std::pair<std::size_t, std::size_t>> claim;  // route steps
  bool arrived = false;
};

struct Frame {
  double t = 0.0;
  std::vector<AgentFrame> agents;
};

struct ClaimChange {
  double t = 0.0;
  int agent = -1;
  std::size_t first = 0, last = 0;
  std::vector<AreaId> areas;  // empty when the claim was dropped
};

struct SimRecord {
  std::vector<Frame> frames;
  std::vector<Event> events;
  std::vector<ClaimChange> claims;
  std::vector<std::size_t> group_sizes;  // largest group per coordination
};

struct TimeStats {
  double min = 0.0, max = 0.0, sum = 0.0;
  std::size_t count = 0;

  void add(double v) {
    min = count ? std::min(min, v) : v;
    max = count ? std::max(max, v) : v;
    sum += v;
    ++count;
  }
  void merge(const TimeStats& o) {
    if (!o.count) return;
    min = count ? std::min(min, o.min) : o.min;
    max = count ? std::max(max, o.max) : o.max;
    sum += o.sum;
    count += o.count;
  }
  double avg() const { return count ? sum / static_cast<double>(count) : 0.0; }
};

struct Metrics {
  bool succ = false, inf = false, coll = false, stall = false, timeout = false;
  std::size_t agents = 0;
  std::size_t infeasible_solves = 0, agent_collisions = 0, wall_collisions = 0, crossings = 0, coordinations = 0;
  TimeStats t_mpc, t_total;  // ms per solve
  double avg_group = 0.0;    // mean largest coordination group
  std::vector<double> arrival;  // s, NaN when the agent did not arrive
  double T_1 = std::numeric_limits<double>::quiet_NaN();  // last arrival, succ only
  double sim_time = 0.0;
};

// ------------------------------------------------------------ detectors

/// Whether an agent at `p` has moved from route step k_t into k_t + 1: it
/// must lie inside the next area and at least `clearance` outside the
/// current one, so that releasing the current area is safe.
inline bool crossed_into_next(const SemanticMap& map, const Route& route, Vec2 p, double clearance) {
  if (route.finished()) return false;
  const AreaId next = route.areas[route.current + 1];
  if (!map.area_contains(next, p)) return false;
  return polygon_distance(map.area(route.current_area()).polygon, p) >= clearance;
}

/// Crossing event for a move from `prev` to `next`; advances `route` past
/// every interface the new position has cleared.
inline std::optional<Event> detect_interface_crossing(const AgentState& prev, const AgentState& next,
                                                      const SemanticMap& map, Route& route, double clearance,
                                                      double t = 0.0) {
  (void)prev;
  std::optional<Event> out;
  while (crossed_into_next(map, route, next.position, clearance)) {
    const auto itf = map.interfaces_between(route.areas[route.current], route.areas[route.current + 1]);
    ++route.current;
    out = Event{t, EventKind::kCrossing, route.agent.value, itf.empty() ? -1 : itf.front().value};
  }
  return out;
}

/// Agent pairs closer than 2 r_v and agents closer than r_v to a physical
/// wall. Pairs are listed lower index first.
inline std::vector<Event> detect_collisions(const std::vector<AgentState>& states, const std::vector<int>& ids,
                                            const SemanticMap& map, double r_v, double t = 0.0) {
  std::vector<Event> out;
  for (std::size_t i = 0; i < states.size(); ++i) {
    for (std::size_t j = i + 1; j < states.size(); ++j) {
      if (distance(states[i].position, states[j].position) < 2.0 * r_v) {
        out.push_back({t, EventKind::kAgentCollision, ids[i], ids[j]});
      }
    }
  }
  for (std::size_t i = 0; i < states.size(); ++i) {
    for (const auto& b : map.boundaries()) {
      bool hit = false;
      for (const auto& s : b.segments) hit = hit || point_segment_distance(states[i].position, s) < r_v;
      if (hit) out.push_back({t, EventKind::kWallCollision, ids[i], b.id.value});
    }
  }
  return out;
}

/// Distance by which `p` lies outside the union of the claimed areas and
/// their sub-areas; zero inside.
inline double claim_excursion(const SemanticMap& map, const AgentClaim& claim, Vec2 p) {
  double d = std::numeric_limits<double>::infinity();
  for (AreaId a : claim.family) d = std::min(d, polygon_distance(map.area(a).polygon, p));
  return d;
}

// ------------------------------------------------------------ simulation

class Simulation {
 public:
  Simulation(Scenario scenario, SimOptions opt)
      : s_(std::move(scenario)), opt_(opt), noise_(s_.seed ^ 0x9e3779b97f4a7c15ULL) {
    s_.config.validate();
    routes_ = routes_of(s_);
    const std::size_t n = s_.agents.size();
    states_.reserve(n);
    for (const auto& a : s_.agents) states_.push_back(a.start);
    warm_.resize(n);
    arrived_.assign(n, false);
    metrics_.agents = n;
    metrics_.arrival.assign(n, std::numeric_limits<double>::quiet_NaN());
    need_coordination_ = true;
    done_ = n == 0;
    if (done_) metrics_.succ = true;
  }

  bool done() const { return done_; }
  double time() const { return static_cast<double>(steps_) / s_.config.f; }
  double period() const { return 1.0 / s_.config.f; }
  const Scenario& scenario() const { return s_; }
  const std::vector<AgentState>& states() const { return states_; }
  const std::vector<Route>& routes() const { return routes_; }
  const ClaimLedger& ledger() const { return ledger_; }
  const SimRecord& record() const { return record_; }
  const Metrics& metrics() const { return metrics_; }
  bool arrived(std::size_t i) const { return arrived_[i]; }

  void step() {
    if (done_) return;
    using clock = std::chrono::steady_clock;
    const double t = time();
    const MPCConfig& c = s_.config;
    const std::size_t n = states_.size();

    double coord_ms = 0.0;
    if (need_coordination_ && opt_.mode == Mode::kClaims) {
      const auto t0 = clock::now();
      auto res = coordinate(s_.map, routes_, ledger_, static_cast<std::size_t>(c.N_h), opt_.policy);
      coord_ms = std::chrono::duration<double, std::milli>(clock::now() - t0).count();
      log_claim_changes(t, res.ledger);
      ledger_ = std::move(res.ledger);
      record_.group_sizes.push_back(res.largest_group());
      ++metrics_.coordinations;
    }
    need_coordination_ = false;

    Frame frame;
    frame.t = t;
    std::vector<ControlInput> inputs(n);
    for (std::size_t i = 0; i < n; ++i) {
      AgentFrame af;
      af.state = states_[i];
      af.k_t = routes_[i].current;
      af.arrived = arrived_[i];
      if (const AgentClaim* cl = ledger_.find(routes_[i].agent)) af.claim = std::make_pair(cl->first, cl->last);
      if (arrived_[i]) {
        inputs[i] = fallback_on_infeasible(states_[i], c);
      } else {
        const auto t0 = clock::now();
        const std::size_t claim_last = claim_end(i);
        const Solution* prev = warm_[i] ? &*warm_[i] : nullptr;
        NavigationProblem p = build_problem(s_.map, routes_[i], claim_last, s_.agents[i].goal, states_[i], prev, c);
        Solution sol = solve(p, prev);
        const double total_ms = std::chrono::duration<double, std::milli>(clock::now() - t0).count() + coord_ms;
        metrics_.t_mpc.add(sol.solve_time * 1e3);
        metrics_.t_total.add(total_ms);
        af.status = sol.status;
        af.solve_ms = sol.solve_time * 1e3;
        af.evaluations = sol.iterations;
        if (sol.status == SolveStatus::kInfeasible) {
          inputs[i] = fallback_on_infeasible(states_[i], c);
          ++metrics_.infeasible_solves;
          metrics_.inf = true;
          record_.events.push_back({t, EventKind::kInfeasible, routes_[i].agent.value, -1});
        } else {
          inputs[i] = sol.inputs.front();
        }
        warm_[i] = std::move(sol);
      }
      af.input = inputs[i];
      frame.agents.push_back(af);
    }
    if (opt_.record_frames) record_.frames.push_back(std::move(frame));

    // Plant.
    const double h = period();
    std::normal_distribution<double> gauss(0.0, opt_.plant_noise > 0 ? opt_.plant_noise : 1.0);
    prev_states_ = states_;
    for (std::size_t i = 0; i < n; ++i) {
      AgentState x = dynamics_step(states_[i], inputs[i], h, c.rk4);
      x.speed = project_speed(x.speed, c);
      x.heading = wrap_angle(x.heading);
      if (opt_.plant_noise > 0) x.position += Vec2{gauss(noise_), gauss(noise_)};
      states_[i] = x;
    }
    ++steps_;
    const double t1 = time();

    const double clearance = c.wall_radius() + opt_.crossing_margin;
    for (std::size_t i = 0; i < n; ++i) {
      if (auto ev = detect_interface_crossing(prev_states_[i], states_[i], s_.map, routes_[i], clearance, t1)) {
        record_.events.push_back(*ev);
        ++metrics_.crossings;
        need_coordination_ = true;
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (arrived_[i] || !routes_[i].finished()) continue;
      if (distance(states_[i].position, s_.agents[i].goal) <= opt_.arrive_tol &&
          states_[i].speed <= opt_.arrive_speed) {
        arrived_[i] = true;
        metrics_.arrival[i] = t1;
        record_.events.push_back({t1, EventKind::kArrival, routes_[i].agent.value, -1});
      }
    }

    std::vector<int> ids;
    for (const auto& a : s_.agents) ids.push_back(a.id.value);
    std::set<std::pair<int, int>> now;
    for (const Event& e : detect_collisions(states_, ids, s_.map, c.r_v, t1)) {
      const int tag = e.kind == EventKind::kAgentCollision ? e.other : -1 - e.other;
      now.emplace(e.agent, tag);
      if (colliding_.contains({e.agent, tag})) continue;
      record_.events.push_back(e);
      metrics_.coll = true;
      ++(e.kind == EventKind::kAgentCollision ? metrics_.agent_collisions : metrics_.wall_collisions);
    }
    colliding_ = std::move(now);

    bool all_arrived = true, all_still = true;
    for (std::size_t i = 0; i < n; ++i) {
      if (arrived_[i]) continue;
      all_arrived = false;
      all_still = all_still && std::abs(states_[i].speed) < opt_.stall_speed;
    }
    still_time_ = all_still && !all_arrived ? still_time_ + h : 0.0;

    if (all_arrived) {
      finish(t1);
    } else if (metrics_.coll && opt_.stop_on_collision) {
      finish(t1);
    } else if (still_time_ >= opt_.stall_time - 1e-9) {
      metrics_.stall = true;
      record_.events.push_back({t1, EventKind::kStall, -1, -1});
      finish(t1);
    } else if (t1 >= s_.max_sim_time - 1e-9) {
      metrics_.timeout = true;
      record_.events.push_back({t1, EventKind::kTimeout, -1, -1});
      finish(t1);
    }
  }

  void run() {
    while (!done_) step();
  }

 private:
  std::size_t claim_end(std::size_t i) const {
    if (opt_.mode == Mode::kNever) return routes_[i].last();
    const AgentClaim* cl = ledger_.find(routes_[i].agent);
    return cl ? std::max(cl->last, routes_[i].current) : routes_[i].current;
  }

  void log_claim_changes(double t, const ClaimLedger& next) {
    for (const auto& r : routes_) {
      const AgentClaim* a = ledger_.find(r.agent);
      const AgentClaim* b = next.find(r.agent);
      if (!a && !b) continue;
      if (a && b && a->first == b->first && a->last == b->last) continue;
      ClaimChange ch{t, r.agent.value, 0, 0, {}};
      if (b) {
        ch.first = b->first;
        ch.last = b->last;
        ch.areas = b->areas;
      }
      record_.claims.push_back(std::move(ch));
    }
  }

  void finish(double t) {
    done_ = true;
    metrics_.sim_time = t;
    if (opt_.record_frames) {
      Frame f;
      f.t = t;
      for (std::size_t i = 0; i < states_.size(); ++i) {
        AgentFrame af;
        af.state = states_[i];
        af.k_t = routes_[i].current;
        af.arrived = arrived_[i];
        if (const AgentClaim* cl = ledger_.find(routes_[i].agent)) af.claim = std::make_pair(cl->first, cl->last);
        f.agents.push_back(af);
      }
      record_.frames.push_back(std::move(f));
    }
    bool all = true;
    for (bool a : arrived_) all = all && a;
    metrics_.succ = all && !metrics_.coll;
    if (metrics_.succ) {
      double last = 0.0;
      for (double a : metrics_.arrival) last = std::max(last, a);
      metrics_.T_1 = last;
    }
    if (opt_.mode == Mode::kNever) {
      metrics_.avg_group = states_.empty() ? 0.0 : 1.0;
    } else if (!record_.group_sizes.empty()) {
      double sum = 0.0;
      for (std::size_t g : record_.group_sizes) sum += static_cast<double>(g);
      metrics_.avg_group = sum / static_cast<double>(record_.group_sizes.size());
    }
  }

  Scenario s_;
  SimOptions opt_;
  std::mt19937_64 noise_;
  std::vector<Route> routes_;
  std::vector<AgentState> states_, prev_states_;
  std::vector<std::optional<Solution>> warm_;
  std::vector<bool> arrived_;
  ClaimLedger ledger_;
  SimRecord record_;
  Metrics metrics_;
  std::set<std::pair<int, int>> colliding_;
  std::size_t steps_ = 0;
  double still_time_ = 0.0;
  bool need_coordination_ = false;
  bool done_ = false;
};

inline std::pair<SimRecord, Metrics> run(const Scenario& scenario, const SimOptions& opt = {}) {
  Simulation sim(scenario, opt);
  sim.run();
  return {sim.record(), sim.metrics()};
}

// ------------------------------------------------------------- aggregate

struct Summary {
  std::size_t runs = 0, completed = 0;
  double succ_pct = 0.0, inf_pct = 0.0, coll_pct = 0.0, stall_pct = 0.0;
  TimeStats t_mpc, t_total, T_1;  // over completed runs
  double avg_group = 0.0;         // over all runs
};

inline Summary aggregate(const std::vector<Metrics>& runs) {
  Summary s;
  s.runs = runs.size();
  if (runs.empty()) return s;
  std::size_t succ = 0, inf = 0, coll = 0, stall = 0;
  double groups = 0.0;
  for (const auto& m : runs) {
    succ += m.succ;
    inf += m.inf;
    coll += m.coll;
    stall += m.stall;
    groups += m.avg_group;
    if (!m.succ) continue;
    ++s.completed;
    s.t_mpc.merge(m.t_mpc);
    s.t_total.merge(m.t_total);
    s.T_1.add(m.T_1);
  }
  const double n = static_cast<double>(runs.size());
  s.succ_pct = 100.0 * static_cast<double>(succ) / n;
  s.inf_pct = 100.0 * static_cast<double>(inf) / n;
  s.coll_pct = 100.0 * static_cast<double>(coll) / n;
  s.stall_pct = 100.0 * static_cast<double>(stall) / n;
  s.avg_group = groups / n;
  return s;
}

}  // namespace claimnav
