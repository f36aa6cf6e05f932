#pragma once
// Selection of the agents that have to coordinate. Each agent looks ahead to
// its claim horizon; agents whose horizons share an area family end up in the
// same group and run one claim-policy round together.

#include <algorithm>
#include <map>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

#include "claimnav/claim_policy.hpp"

namespace claimnav {

struct CoordinationHorizon {
  AgentId agent;
  std::size_t k_h = 0;
  std::vector<AreaId> sub_route;  // route steps k_t..k_h
};

struct CoordinationGroup {
  std::vector<AgentId> members;  // ascending
  bool operator==(const CoordinationGroup&) const = default;
};

/// k_h = max(k_free, k_t + n_h), clamped to the last route index. A sentinel
/// k_free (no free area ahead) therefore extends the horizon to the goal.
inline CoordinationHorizon compute_horizon(const Route& r, std::size_t k_free, std::size_t n_h) {
  CoordinationHorizon h;
  h.agent = r.agent;
  h.k_h = std::min(std::max(k_free, r.current + n_h), r.last());
  for (std::size_t k = r.current; k <= h.k_h; ++k) h.sub_route.push_back(r.areas[k]);
  return h;
}

inline CoordinationHorizon compute_horizon(const SemanticMap& map, const Route& r, std::span<const Route> all,
                                           std::size_t n_h) {
  std::vector<AreaSet> conflicts;
  for (const Route& o : all) {
    if (o.agent != r.agent) conflicts.push_back(conflict_set(map, r, o).areas);
  }
  return compute_horizon(r, compute_k_free(map, r, conflicts), n_h);
}

/// Unordered pairs (lower id first) whose sub-area expanded horizons meet.
inline std::vector<std::pair<AgentId, AgentId>> overlapping_pairs(std::span<const CoordinationHorizon> horizons,
                                                                  const SemanticMap& map) {
  std::vector<AreaSet> fam;
  fam.reserve(horizons.size());
  for (const auto& h : horizons) {
    AreaSet f;
    for (AreaId a : h.sub_route) f.insert_all(map.sub_closure(a));
    fam.push_back(std::move(f));
  }
  std::vector<std::pair<AgentId, AgentId>> out;
  for (std::size_t i = 0; i < horizons.size(); ++i) {
    for (std::size_t j = i + 1; j < horizons.size(); ++j) {
      if (!fam[i].intersects(fam[j])) continue;
      out.emplace_back(std::min(horizons[i].agent, horizons[j].agent), std::max(horizons[i].agent, horizons[j].agent));
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

/// Connected components of the pair graph. Groups are sorted by their
/// smallest member.
inline std::vector<CoordinationGroup> coordination_groups(std::span<const std::pair<AgentId, AgentId>> pairs,
                                                          std::span<const AgentId> agents) {
  std::map<AgentId, std::size_t> slot;
  for (AgentId a : agents) slot.emplace(a, slot.size());
  std::vector<std::size_t> parent(slot.size());
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const auto& [a, b] : pairs) {
    auto ia = slot.find(a);
    auto ib = slot.find(b);
    if (ia == slot.end() || ib == slot.end()) continue;
    const std::size_t ra = find(ia->second);
    const std::size_t rb = find(ib->second);
    if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
  }
  std::map<std::size_t, CoordinationGroup> by_root;
  for (const auto& [agent, s] : slot) by_root[find(s)].members.push_back(agent);
  std::vector<CoordinationGroup> out;
  for (auto& [_, g] : by_root) {
    std::sort(g.members.begin(), g.members.end());
    out.push_back(std::move(g));
  }
  std::sort(out.begin(), out.end(),
            [](const CoordinationGroup& a, const CoordinationGroup& b) { return a.members.front() < b.members.front(); });
  return out;
}

struct CoordinationResult {
  std::vector<CoordinationHorizon> horizons;
  std::vector<std::pair<AgentId, AgentId>> pairs;
  std::vector<CoordinationGroup> groups;
  std::vector<ClaimRound> rounds;  // one per group, same order
  ClaimLedger ledger;

  std::size_t largest_group() const {
    std::size_t n = 0;
    for (const auto& g : groups) n = std::max(n, g.members.size());
    return n;
  }
};

/// Horizons, groups and one claim round per group. Groups run in order of
/// their smallest member; each sees the ledger left by the groups before it.
inline CoordinationResult coordinate(const SemanticMap& map, std::span<const Route> routes, const ClaimLedger& previous,
                                     std::size_t n_h, const ClaimPolicyOptions& opt = {}) {
  CoordinationResult out;
  std::vector<AgentId> agents;
  for (const Route& r : routes) {
    out.horizons.push_back(compute_horizon(map, r, routes, n_h));
    agents.push_back(r.agent);
  }
  out.pairs = overlapping_pairs(out.horizons, map);
  out.groups = coordination_groups(out.pairs, agents);
  out.ledger = previous;
  release_passed(map, routes, out.ledger, opt.hold_claims);
  for (const auto& g : out.groups) {
    std::vector<Route> members;
    for (AgentId a : g.members) {
      auto it = std::find_if(routes.begin(), routes.end(), [&](const Route& r) { return r.agent == a; });
      members.push_back(*it);
    }
    ClaimRound round = run_claim_policy(map, members, out.ledger, opt, routes);
    out.ledger = round.ledger;
    out.rounds.push_back(std::move(round));
  }
  // Groups can all be waiting on each other's held claims; one feasible step
  // anywhere keeps the system moving.
  if (opt.safety_check) ensure_progress(map, routes, out.ledger, routes, opt);
  return out;
}

}  // namespace claimnav
