#pragma once
// Discrete area-claim policy. Agents reserve contiguous stretches of their
// routes; a claim on an area also reserves its sub-areas. The policy keeps
// claims mutually exclusive and avoids handing out claims that would lock two
// agents into a head-on standoff or park one inside another's goal approach.
//
// Route indices are 0-based; `last` is the index of the final area. The
// "no free area ahead" sentinel returned by compute_k_free is size() + 1.

#include <algorithm>
#include <cstddef>
#include <limits>
#include <map>
#include <set>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "claimnav/semantic_map.hpp"

namespace claimnav {

struct Route {
  AgentId agent;
  std::vector<AreaId> areas;
  std::size_t current = 0;  // k_t

  std::size_t last() const { return areas.empty() ? 0 : areas.size() - 1; }
  bool finished() const { return current >= last(); }
  AreaId current_area() const { return areas.at(current); }
};

/// Raised when the inputs break the policy's standing assumptions, e.g. two
/// agents starting in overlapping areas.
class ClaimPolicyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Areas, with sub-areas, of route steps [from, route end].
inline AreaSet remaining_family(const SemanticMap& map, const Route& r, std::size_t from) {
  AreaSet out;
  for (std::size_t k = from; k < r.areas.size(); ++k) out.insert_all(map.sub_closure(r.areas[k]));
  return out;
}

struct ConflictSet {
  AgentId first;
  AgentId second;
  AreaSet areas;
};

/// Future areas (sub-area expanded) shared by two agents' remaining routes.
inline ConflictSet conflict_set(const SemanticMap& map, const Route& ri, const Route& rj) {
  if (ri.agent == rj.agent) throw ClaimPolicyError("conflict set of an agent with itself");
  const AreaSet fi = remaining_family(map, ri, ri.current);
  const AreaSet fj = remaining_family(map, rj, rj.current);
  return {std::min(ri.agent, rj.agent), std::max(ri.agent, rj.agent), fi.intersection(fj)};
}

/// Contiguous claim [first, last] on an agent's route.
struct AgentClaim {
  std::size_t first = 0;
  std::size_t last = 0;
  std::vector<AreaId> areas;  // route areas first..last in order
  AreaSet family;             // areas plus their sub-areas

  std::size_t size() const { return areas.size(); }
};

class ClaimLedger {
 public:
  bool has(AgentId a) const { return claims_.contains(a); }

  const AgentClaim* find(AgentId a) const {
    auto it = claims_.find(a);
    return it == claims_.end() ? nullptr : &it->second;
  }

  /// Replaces the agent's claim with route steps [first, last].
  void set(const SemanticMap& map, const Route& r, std::size_t first, std::size_t last) {
    AgentClaim c;
    c.first = first;
    c.last = last;
    for (std::size_t k = first; k <= last && k < r.areas.size(); ++k) {
      c.areas.push_back(r.areas[k]);
      c.family.insert_all(map.sub_closure(r.areas[k]));
    }
    claims_[r.agent] = std::move(c);
  }

  void erase(AgentId a) { claims_.erase(a); }

  /// Claimed families of every agent except `self`.
  AreaSet others(AgentId self) const {
    AreaSet out;
    for (const auto& [agent, c] : claims_) {
      if (agent != self) out.insert_all(c.family);
    }
    return out;
  }

  AreaSet family(AgentId a) const {
    auto it = claims_.find(a);
    return it == claims_.end() ? AreaSet{} : it->second.family;
  }

  AreaSet all() const {
    AreaSet out;
    for (const auto& [_, c] : claims_) out.insert_all(c.family);
    return out;
  }

  const std::map<AgentId, AgentClaim>& entries() const { return claims_; }
  bool operator==(const ClaimLedger& o) const {
    if (claims_.size() != o.claims_.size()) return false;
    for (const auto& [a, c] : claims_) {
      auto it = o.claims_.find(a);
      if (it == o.claims_.end() || it->second.first != c.first || it->second.last != c.last ||
          it->second.areas != c.areas) {
        return false;
      }
    }
    return true;
  }

 private:
  std::map<AgentId, AgentClaim> claims_;
};

struct ClaimIndices {
  std::size_t k_free = 0;
  std::size_t k_claim = 0;
  std::size_t k_nblock = 0;
  std::size_t k_nconf = 0;
};

inline std::size_t no_free_area(const Route& r) { return r.areas.size() + 1; }

/// Smallest index after k_t whose area family avoids every conflict set, or
/// the sentinel size()+1 when none exists.
inline std::size_t compute_k_free(const SemanticMap& map, const Route& r, std::span<const AreaSet> conflicts) {
  for (std::size_t k = r.current + 1; k < r.areas.size(); ++k) {
    const AreaSet& fam = map.sub_closure(r.areas[k]);
    const bool clear = std::none_of(conflicts.begin(), conflicts.end(), [&](const AreaSet& c) { return fam.intersects(c); });
    if (clear) return k;
  }
  return no_free_area(r);
}

/// Largest index such that every step from k_t up to it avoids claims held by
/// others. Never below k_t: the current area is always claimable.
inline std::size_t compute_k_claim(const SemanticMap& map, const Route& r, const AreaSet& claimed_by_others) {
  std::size_t kappa = r.current;
  for (std::size_t k = r.current + 1; k < r.areas.size(); ++k) {
    if (map.sub_closure(r.areas[k]).intersects(claimed_by_others)) break;
    kappa = k;
  }
  return kappa;
}

inline std::size_t compute_k_claim(const SemanticMap& map, const Route& r, const ClaimLedger& ledger) {
  return compute_k_claim(map, r, ledger.others(r.agent));
}

enum class TabooReading {
  kAnyAgent,   // per-agent alignment: the suffix overlaps one agent's suffix
  kAllAgents,  // the aligned overlap has to hold for every other agent
};

/// Length-minus-one of the aligned suffix overlap between two remaining
/// routes, or nullopt when even the final areas do not overlap.
inline std::optional<std::size_t> aligned_suffix_overlap(const SemanticMap& map, const Route& ri, const Route& rj) {
  if (ri.areas.empty() || rj.areas.empty()) return std::nullopt;
  const std::size_t n = ri.last();
  const std::size_t m = rj.last();
  std::optional<std::size_t> kappa;
  for (std::size_t k = 0; k <= n && k <= m; ++k) {
    if (n - k < ri.current || m - k < rj.current) break;
    if (!map.sub_closure(ri.areas[n - k]).intersects(map.sub_closure(rj.areas[m - k]))) break;
    kappa = k;
  }
  return kappa;
}

/// Areas near the end of the route that must not be claimed because they
/// overlap, step-for-step from the goal backwards, another agent's approach to
/// its own goal.
inline AreaSet compute_taboo_set(const SemanticMap& map, const Route& ri, std::span<const Route> others,
                                 TabooReading reading = TabooReading::kAnyAgent) {
  // Aligned overlap length per agent; -1 for no overlap at all.
  long kappa = reading == TabooReading::kAnyAgent ? -1 : std::numeric_limits<long>::max();
  bool any = false;
  for (const Route& rj : others) {
    if (rj.agent == ri.agent) continue;
    const auto kj = aligned_suffix_overlap(map, ri, rj);
    const long v = kj ? static_cast<long>(*kj) : -1;
    kappa = reading == TabooReading::kAnyAgent ? std::max(kappa, v) : std::min(kappa, v);
    any = true;
  }
  AreaSet out;
  if (!any || kappa < 0) return out;
  for (long k = 0; k <= kappa; ++k) out.insert(ri.areas[ri.last() - static_cast<std::size_t>(k)]);
  return out;
}

/// True when claiming route step `kappa` would put agent i in an area that
/// another agent j still has to traverse in the opposite direction, i.e. j
/// would come out of the area i enters next.
inline bool head_on(const SemanticMap& map, const Route& ri, std::size_t kappa, const Route& rj) {
  if (kappa + 1 >= ri.areas.size()) return false;
  const AreaSet& here = map.sub_closure(ri.areas[kappa]);
  const AreaSet& next = map.sub_closure(ri.areas[kappa + 1]);
  for (std::size_t q = rj.current + 1; q < rj.areas.size(); ++q) {
    if (!map.sub_closure(rj.areas[q]).intersects(here)) continue;
    if (map.sub_closure(rj.areas[q - 1]).intersects(next)) return true;
  }
  return false;
}

/// Largest index up to min(k_free, k_claim) such that every step from k_t+1
/// to it is outside the taboo set and free of head-on standoffs with the
/// other agents. Returns k_t when the first step already fails.
inline std::size_t compute_k_nblock(const SemanticMap& map, const Route& ri, std::span<const Route> others,
                                    std::size_t k_free, std::size_t k_claim, const AreaSet& taboo) {
  const std::size_t limit = std::min({k_free, k_claim, ri.last()});
  std::size_t kappa = ri.current;
  for (std::size_t k = ri.current + 1; k <= limit; ++k) {
    if (taboo.contains(ri.areas[k])) break;
    const bool blocked = std::any_of(others.begin(), others.end(), [&](const Route& rj) {
      return rj.agent != ri.agent && head_on(map, ri, k, rj);
    });
    if (blocked) break;
    kappa = k;
  }
  return kappa;
}

/// Largest index within k_t + n_ch such that every step up to it is either
/// conflict-free or already claimed by the agent.
inline std::size_t compute_k_nconf(const SemanticMap& map, const Route& r, std::span<const AreaSet> conflicts,
                                   const AreaSet& own_claims, std::size_t n_ch) {
  const std::size_t limit = std::min(r.current + n_ch, r.last());
  std::size_t kappa = r.current;
  for (std::size_t k = r.current; k <= limit; ++k) {
    const AreaSet& fam = map.sub_closure(r.areas[k]);
    const bool clear = std::none_of(conflicts.begin(), conflicts.end(), [&](const AreaSet& c) { return fam.intersects(c); });
    if (!clear && !fam.intersects(own_claims)) break;
    kappa = k;
  }
  return kappa;
}

struct ClaimPolicyOptions {
  std::size_t n_ch = 4;
  TabooReading taboo_reading = TabooReading::kAnyAgent;
  /// Keep claims from the previous round that are still ahead of the agent.
  /// An agent may already be driving into an area it claimed, so taking the
  /// claim away could strand it across an interface.
  bool hold_claims = true;
  /// Grant a claim only when every agent can still finish afterwards (see
  /// can_complete). Off reproduces the bare policy.
  bool safety_check = true;
  /// Search budget for can_complete; an exhausted budget counts as "no".
  std::size_t max_search_states = 20000;
};

/// An order in which the agents can finish their remaining routes one after
/// another, each driving all the way while the others stay put: agents that
/// have not moved yet sit in their current areas, agents that have moved sit
/// in their final areas. Smallest index first among ready agents.
inline std::optional<std::vector<std::size_t>> sequential_order(const SemanticMap& map, std::span<const Route> routes,
                                                                const std::vector<std::size_t>& pos) {
  const std::size_t n = routes.size();
  std::vector<AreaSet> ahead(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = pos[i] + 1; k < routes[i].areas.size(); ++k) ahead[i].insert_all(map.sub_closure(routes[i].areas[k]));
  }
  // before[i][j]: i has to finish before j starts.
  std::vector<std::vector<char>> before(n, std::vector<char>(n, 0));
  std::vector<std::size_t> indeg(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const bool through_start = ahead[i].intersects(map.sub_closure(routes[j].areas[pos[j]]));
      const bool through_goal = ahead[i].intersects(map.sub_closure(routes[j].areas.back()));
      if (through_start && through_goal) return std::nullopt;
      if (through_start && !before[j][i]) before[j][i] = 1, ++indeg[i];
      if (through_goal && !before[i][j]) before[i][j] = 1, ++indeg[j];
    }
  }
  std::vector<std::size_t> order;
  std::vector<char> placed(n, 0);
  while (order.size() < n) {
    std::size_t pick = n;
    for (std::size_t i = 0; i < n && pick == n; ++i) {
      if (!placed[i] && indeg[i] == 0) pick = i;
    }
    if (pick == n) return std::nullopt;
    placed[pick] = 1;
    order.push_back(pick);
    for (std::size_t j = 0; j < n; ++j) {
      if (before[pick][j]) --indeg[j];
    }
  }
  return order;
}

/// Whether all agents can still reach their final areas from the given route
/// positions when they advance one area at a time and no two agents ever hold
/// overlapping area families. Depth-first search with memoization; returns
/// false when the budget runs out.
inline bool can_complete(const SemanticMap& map, std::span<const Route> routes, std::vector<std::size_t> pos,
                         std::size_t max_states = 20000) {
  const std::size_t n = routes.size();
  // Final areas that block another agent's remaining route park the agent
  // there for good; such moves never lead to completion.
  auto blocks_someone = [&](std::size_t i, const std::vector<std::size_t>& ks) {
    const AreaSet& fin = map.sub_closure(routes[i].areas.back());
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      for (std::size_t k = ks[j] + 1; k < routes[j].areas.size(); ++k) {
        if (map.sub_closure(routes[j].areas[k]).intersects(fin)) return true;
      }
    }
    return false;
  };
  auto free_for = [&](std::size_t i, std::size_t k, const std::vector<std::size_t>& ks) {
    const AreaSet& fam = map.sub_closure(routes[i].areas[k]);
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i && fam.intersects(map.sub_closure(routes[j].areas[ks[j]]))) return false;
    }
    return true;
  };
  for (std::size_t i = 0; i < n; ++i) {
    if (pos[i] >= routes[i].areas.size()) return false;
    if (!free_for(i, pos[i], pos)) return false;
  }
  if (sequential_order(map, routes, pos)) return true;
  std::set<std::vector<std::size_t>> seen;
  std::vector<std::vector<std::size_t>> stack{pos};
  while (!stack.empty()) {
    std::vector<std::size_t> ks = std::move(stack.back());
    stack.pop_back();
    if (!seen.insert(ks).second) continue;
    if (seen.size() > max_states) return false;
    bool done = true;
    bool dead = false;
    for (std::size_t i = 0; i < n; ++i) {
      const bool at_end = ks[i] + 1 == routes[i].areas.size();
      done = done && at_end;
      if (at_end && blocks_someone(i, ks)) dead = true;
    }
    if (done) return true;
    if (dead) continue;
    // Pushed last is tried first: moves into final areas go in first so that
    // ordinary moves are explored before parking anyone.
    std::vector<std::vector<std::size_t>> finals;
    std::vector<std::vector<std::size_t>> ordinary;
    for (std::size_t i = n; i-- > 0;) {
      if (ks[i] + 1 >= routes[i].areas.size() || !free_for(i, ks[i] + 1, ks)) continue;
      std::vector<std::size_t> next = ks;
      ++next[i];
      if (seen.contains(next)) continue;
      (next[i] + 1 == routes[i].areas.size() ? finals : ordinary).push_back(std::move(next));
    }
    for (auto& f : finals) stack.push_back(std::move(f));
    for (auto& o : ordinary) stack.push_back(std::move(o));
  }
  return false;
}

/// Trims each listed agent's claim to the part at or ahead of k_t. Without
/// `hold`, claims are dropped entirely and rebuilt by the next round.
inline void release_passed(const SemanticMap& map, std::span<const Route> routes, ClaimLedger& ledger, bool hold = true) {
  for (const Route& r : routes) {
    const AgentClaim* old = ledger.find(r.agent);
    const bool keep =
        hold && old && old->first <= r.current && r.current <= old->last && old->last < r.areas.size();
    if (keep) {
      ledger.set(map, r, r.current, old->last);
    } else {
      ledger.erase(r.agent);
    }
  }
}

/// Result of one round over one group, kept for the run trace.
struct ClaimRound {
  ClaimLedger ledger;
  std::map<AgentId, ClaimIndices> indices;
  std::vector<ConflictSet> conflicts;
};

namespace detail {

/// Route positions used by the safety check: every agent is assumed to have
/// driven to the end of its claim already. Its claimed areas are its own, so
/// it can always get there; if all agents can finish from those positions
/// they can finish from the real ones too.
inline std::vector<std::size_t> claim_ends(std::span<const Route> routes, const ClaimLedger& ledger) {
  std::vector<std::size_t> pos;
  for (const Route& r : routes) {
    const AgentClaim* c = ledger.find(r.agent);
    pos.push_back(c && c->last < r.areas.size() ? std::max(c->last, r.current) : r.current);
  }
  return pos;
}

inline std::size_t slot_of(std::span<const Route> routes, AgentId a) {
  for (std::size_t i = 0; i < routes.size(); ++i) {
    if (routes[i].agent == a) return i;
  }
  return routes.size();
}

}  // namespace detail

/// Extends the agent's claim as far as possible towards `to` while keeping the
/// system completable. Returns the new claim end.
inline std::size_t extend_claim(const SemanticMap& map, const Route& r, std::size_t to, ClaimLedger& ledger,
                                std::span<const Route> context, const ClaimPolicyOptions& opt) {
  const AgentClaim* c = ledger.find(r.agent);
  if (!c) return r.current;
  const std::size_t from = c->last;
  const std::size_t first = c->first;
  to = std::min(to, r.last());
  if (to <= from) return from;
  if (!opt.safety_check) {
    ledger.set(map, r, first, to);
    return to;
  }
  const std::size_t slot = detail::slot_of(context, r.agent);
  if (slot == context.size()) {
    ledger.set(map, r, first, to);
    return to;
  }
  std::vector<std::size_t> pos = detail::claim_ends(context, ledger);
  for (std::size_t end = to; end > from; --end) {
    pos[slot] = end;
    if (can_complete(map, context, pos, opt.max_search_states)) {
      ledger.set(map, r, first, end);
      return end;
    }
  }
  return from;
}

/// Requirement 2 backstop: when no agent in `members` holds more than its
/// current area, grant the first member whose next area is free one step,
/// provided everybody can still finish afterwards. Returns the agent that was
/// granted a step, if any.
inline std::optional<AgentId> ensure_progress(const SemanticMap& map, std::span<const Route> members,
                                              ClaimLedger& ledger, std::span<const Route> context,
                                              const ClaimPolicyOptions& opt) {
  bool all_done = true;
  for (const Route& r : members) {
    const AgentClaim* c = ledger.find(r.agent);
    if (c && c->size() > 1) return std::nullopt;
    all_done = all_done && r.finished();
  }
  if (all_done) return std::nullopt;
  std::vector<const Route*> order;
  for (const Route& r : members) order.push_back(&r);
  std::sort(order.begin(), order.end(), [](const Route* a, const Route* b) { return a->agent < b->agent; });
  for (const Route* r : order) {
    if (r->finished()) continue;
    if (map.sub_closure(r->areas[r->current + 1]).intersects(ledger.others(r->agent))) continue;
    if (extend_claim(map, *r, r->current + 1, ledger, context, opt) > r->current) return r->agent;
  }
  return std::nullopt;
}

/// One round of the claim policy over the agents in `group`. Claims of agents
/// outside the group are carried over unchanged and respected. `context`
/// lists every agent's route for the safety check; it defaults to the group.
inline ClaimRound run_claim_policy(const SemanticMap& map, std::span<const Route> group, const ClaimLedger& previous,
                                   const ClaimPolicyOptions& opt = {}, std::span<const Route> context = {}) {
  std::vector<Route> routes(group.begin(), group.end());
  std::sort(routes.begin(), routes.end(), [](const Route& a, const Route& b) { return a.agent < b.agent; });
  for (const Route& r : routes) {
    if (r.areas.empty() || r.current >= r.areas.size()) {
      throw ClaimPolicyError("agent " + std::to_string(r.agent.value) + " has no valid current area");
    }
  }
  if (context.empty()) context = routes;

  ClaimRound out;
  ClaimLedger& ledger = out.ledger;
  ledger = previous;

  // Initialization: drop stale claims, keep what is still ahead.
  release_passed(map, routes, ledger, opt.hold_claims);

  // Claim current area.
  for (const Route& r : routes) {
    const AreaSet& here = map.sub_closure(r.current_area());
    if (here.intersects(ledger.others(r.agent))) {
      throw ClaimPolicyError("current area of agent " + std::to_string(r.agent.value) +
                             " overlaps another agent's claim");
    }
    const AgentClaim* c = ledger.find(r.agent);
    ledger.set(map, r, r.current, c ? std::max(c->last, r.current) : r.current);
  }

  std::map<AgentId, std::vector<AreaSet>> conflicts;
  for (std::size_t i = 0; i < routes.size(); ++i) {
    for (std::size_t j = i + 1; j < routes.size(); ++j) {
      ConflictSet c = conflict_set(map, routes[i], routes[j]);
      conflicts[routes[i].agent].push_back(c.areas);
      conflicts[routes[j].agent].push_back(c.areas);
      out.conflicts.push_back(std::move(c));
    }
  }

  // Claim conflict areas.
  for (const Route& r : routes) {
    const auto& cs = conflicts[r.agent];
    ClaimIndices idx;
    idx.k_free = compute_k_free(map, r, cs);
    idx.k_claim = compute_k_claim(map, r, ledger);
    if (idx.k_claim >= idx.k_free) {
      idx.k_nblock = std::min(idx.k_free, idx.k_claim);
      extend_claim(map, r, idx.k_free, ledger, context, opt);
    } else {
      const AreaSet taboo = compute_taboo_set(map, r, routes, opt.taboo_reading);
      idx.k_nblock = compute_k_nblock(map, r, routes, idx.k_free, idx.k_claim, taboo);
      extend_claim(map, r, idx.k_nblock, ledger, context, opt);
    }
    out.indices[r.agent] = idx;
  }

  // Claim remaining non-conflict areas.
  for (const Route& r : routes) {
    const auto& cs = conflicts[r.agent];
    ClaimIndices& idx = out.indices[r.agent];
    idx.k_nconf = compute_k_nconf(map, r, cs, ledger.family(r.agent), opt.n_ch);
    // Areas outside every in-group route can still be held by agents of
    // other groups.
    extend_claim(map, r, std::min(idx.k_nconf, compute_k_claim(map, r, ledger)), ledger, context, opt);
  }

  if (opt.safety_check) ensure_progress(map, routes, ledger, context, opt);
  return out;
}

/// Mutual exclusion: no two agents' claimed families intersect.
inline bool check_requirement_1(const ClaimLedger& ledger) {
  const auto& e = ledger.entries();
  for (auto a = e.begin(); a != e.end(); ++a) {
    for (auto b = std::next(a); b != e.end(); ++b) {
      if (a->second.family.intersects(b->second.family)) return false;
    }
  }
  return true;
}

/// Progress: some agent holds more than its current area, or every agent is
/// at the end of its route.
inline bool check_requirement_2(const ClaimLedger& ledger, std::span<const Route> routes) {
  bool all_done = true;
  for (const Route& r : routes) {
    all_done = all_done && r.finished();
    const AgentClaim* c = ledger.find(r.agent);
    if (c && c->size() > 1) return true;
  }
  return all_done;
}

}  // namespace claimnav
