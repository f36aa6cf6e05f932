#pragma once
// Graph world model: areas (possibly nested), boundaries and interfaces, with
// the containment closures and per-agent interface classification used to
// configure both the claim policy and the trajectory optimizer.

#include <algorithm>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "claimnav/geometry.hpp"
#include "claimnav/ids.hpp"

namespace claimnav {

/// Raised when a map violates a structural or geometric invariant. The
/// message names the offending element.
class MapError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Area {
  AreaId id;
  std::string name;
  Polygon polygon;  // convex, counter-clockwise
  std::optional<AreaId> parent;
  std::vector<AreaId> children;
  std::optional<double> speed_limit;
};

struct Boundary {
  BoundaryId id;
  std::vector<Segment> segments;
  std::vector<AreaId> owners;
};

/// Connection between two areas. An interface with a single area is a map
/// exit: it leads out of the modeled region and can only ever be inactive.
struct Interface {
  InterfaceId id;
  std::string name;
  Segment segment;
  std::vector<AreaId> connects;  // one or two areas

  bool connects_area(AreaId a) const { return std::find(connects.begin(), connects.end(), a) != connects.end(); }
  bool is_exit() const { return connects.size() == 1; }
};

/// Tolerance for interface placement on area borders and child containment.
inline constexpr double kMapTolerance = 1e-6;

class SemanticMap {
 public:
  SemanticMap() = default;

  /// Builds and validates the map; throws MapError on the first violation.
  SemanticMap(std::vector<Area> areas, std::vector<Boundary> boundaries, std::vector<Interface> interfaces)
      : areas_(std::move(areas)), boundaries_(std::move(boundaries)), interfaces_(std::move(interfaces)) {
    index();
    validate();
  }

  const std::vector<Area>& areas() const { return areas_; }
  const std::vector<Boundary>& boundaries() const { return boundaries_; }
  const std::vector<Interface>& interfaces() const { return interfaces_; }

  bool has_area(AreaId id) const { return area_index_.contains(id); }

  const Area& area(AreaId id) const {
    auto it = area_index_.find(id);
    if (it == area_index_.end()) throw MapError("unknown area " + std::to_string(id.value));
    return areas_[it->second];
  }

  const Interface& interface(InterfaceId id) const {
    auto it = interface_index_.find(id);
    if (it == interface_index_.end()) throw MapError("unknown interface " + std::to_string(id.value));
    return interfaces_[it->second];
  }

  const Boundary& boundary(BoundaryId id) const {
    auto it = boundary_index_.find(id);
    if (it == boundary_index_.end()) throw MapError("unknown boundary " + std::to_string(id.value));
    return boundaries_[it->second];
  }

  std::optional<AreaId> find_area(const std::string& name) const {
    for (const auto& a : areas_) {
      if (a.name == name) return a.id;
    }
    return std::nullopt;
  }

  std::optional<InterfaceId> find_interface(const std::string& name) const {
    for (const auto& i : interfaces_) {
      if (i.name == name) return i.id;
    }
    return std::nullopt;
  }

  std::vector<AreaId> top_level_areas() const {
    std::vector<AreaId> out;
    for (const auto& a : areas_) {
      if (!a.parent) out.push_back(a.id);
    }
    return out;
  }

  /// The area together with all of its descendants.
  const AreaSet& sub_closure(AreaId id) const {
    auto it = sub_closure_.find(id);
    if (it == sub_closure_.end()) throw MapError("unknown area " + std::to_string(id.value));
    return it->second;
  }

  /// The area together with all of its ancestors.
  const AreaSet& super_closure(AreaId id) const {
    auto it = super_closure_.find(id);
    if (it == super_closure_.end()) throw MapError("unknown area " + std::to_string(id.value));
    return it->second;
  }

  /// Union of sub-closures: every area a claim on `ids` makes unavailable.
  AreaSet expand(const AreaSet& ids) const {
    AreaSet out;
    for (AreaId a : ids) out.insert_all(sub_closure(a));
    return out;
  }

  /// Interfaces touching `id` (its own, not those of its sub-areas).
  const std::vector<InterfaceId>& interfaces_of(AreaId id) const {
    static const std::vector<InterfaceId> none;
    auto it = adjacency_.find(id);
    return it == adjacency_.end() ? none : it->second;
  }

  /// Interfaces joining the two area families.
  std::vector<InterfaceId> interfaces_between(AreaId a, AreaId b) const {
    const AreaSet& fa = sub_closure(a);
    const AreaSet& fb = sub_closure(b);
    std::vector<InterfaceId> out;
    for (const auto& itf : interfaces_) {
      if (itf.connects.size() != 2) continue;
      const AreaId x = itf.connects[0];
      const AreaId y = itf.connects[1];
      if ((fa.contains(x) && fb.contains(y)) || (fa.contains(y) && fb.contains(x))) out.push_back(itf.id);
    }
    return out;
  }

  /// Neighbours of `id` through two-area interfaces, ascending by id.
  std::vector<AreaId> neighbors(AreaId id) const {
    AreaSet out;
    for (InterfaceId i : interfaces_of(id)) {
      const Interface& itf = interface(i);
      for (AreaId a : itf.connects) {
        if (a != id) out.insert(a);
      }
    }
    return out.items();
  }

  std::vector<BoundaryId> boundaries_of(AreaId id) const {
    std::vector<BoundaryId> out;
    for (const auto& b : boundaries_) {
      if (std::find(b.owners.begin(), b.owners.end(), id) != b.owners.end()) out.push_back(b.id);
    }
    return out;
  }

  /// All areas containing `p` (boundary-inclusive), ancestors before
  /// descendants, ties by id.
  std::vector<AreaId> point_in_area(Vec2 p) const {
    std::vector<std::pair<std::size_t, AreaId>> hits;
    for (const auto& a : areas_) {
      if (contains(a.polygon, p, kMapTolerance)) hits.emplace_back(super_closure(a.id).size(), a.id);
    }
    std::sort(hits.begin(), hits.end());
    std::vector<AreaId> out;
    out.reserve(hits.size());
    for (const auto& h : hits) out.push_back(h.second);
    return out;
  }

  bool area_contains(AreaId id, Vec2 p, double tol = kMapTolerance) const {
    return contains(area(id).polygon, p, tol);
  }

  /// True when the top-level areas form one connected component.
  bool top_level_connected() const {
    const auto tops = top_level_areas();
    if (tops.empty()) return true;
    AreaSet seen{tops.front()};
    std::vector<AreaId> stack{tops.front()};
    while (!stack.empty()) {
      AreaId a = stack.back();
      stack.pop_back();
      for (const auto& itf : interfaces_) {
        if (itf.connects.size() != 2) continue;
        AreaId x = top_of(itf.connects[0]);
        AreaId y = top_of(itf.connects[1]);
        AreaId other;
        if (x == a) {
          other = y;
        } else if (y == a) {
          other = x;
        } else {
          continue;
        }
        if (seen.insert(other)) stack.push_back(other);
      }
    }
    return seen.size() == tops.size();
  }

  AreaId top_of(AreaId id) const {
    const Area* a = &area(id);
    while (a->parent) a = &area(*a->parent);
    return a->id;
  }

  /// Physical wall segments of the whole map.
  std::vector<Segment> all_wall_segments() const {
    std::vector<Segment> out;
    for (const auto& b : boundaries_) out.insert(out.end(), b.segments.begin(), b.segments.end());
    return out;
  }

 private:
  void index() {
    for (std::size_t i = 0; i < areas_.size(); ++i) {
      if (!area_index_.emplace(areas_[i].id, i).second) {
        throw MapError("duplicate area id " + std::to_string(areas_[i].id.value));
      }
    }
    for (std::size_t i = 0; i < boundaries_.size(); ++i) {
      if (!boundary_index_.emplace(boundaries_[i].id, i).second) {
        throw MapError("duplicate boundary id " + std::to_string(boundaries_[i].id.value));
      }
    }
    for (std::size_t i = 0; i < interfaces_.size(); ++i) {
      if (!interface_index_.emplace(interfaces_[i].id, i).second) {
        throw MapError("duplicate interface id " + std::to_string(interfaces_[i].id.value));
      }
    }
    // Children lists are derived from parent links so the two never disagree.
    for (auto& a : areas_) a.children.clear();
    for (const auto& a : areas_) {
      if (!a.parent) continue;
      auto it = area_index_.find(*a.parent);
      if (it == area_index_.end()) {
        throw MapError("area " + std::to_string(a.id.value) + " has unknown parent " +
                       std::to_string(a.parent->value));
      }
      areas_[it->second].children.push_back(a.id);
    }
    for (auto& a : areas_) std::sort(a.children.begin(), a.children.end());

    for (const auto& a : areas_) {
      AreaSet up{a.id};
      const Area* cur = &a;
      while (cur->parent) {
        if (!up.insert(*cur->parent)) throw MapError("containment cycle through area " + std::to_string(a.id.value));
        cur = &areas_[area_index_.at(*cur->parent)];
      }
      super_closure_[a.id] = up;
    }
    for (const auto& a : areas_) sub_closure_[a.id] = AreaSet{a.id};
    for (const auto& [id, ups] : super_closure_) {
      for (AreaId anc : ups) sub_closure_[anc].insert(id);
    }
    for (const auto& itf : interfaces_) {
      for (AreaId a : itf.connects) adjacency_[a].push_back(itf.id);
    }
  }

  void validate() const {
    for (const auto& a : areas_) {
      const std::string tag = "area " + std::to_string(a.id.value);
      if (a.polygon.size() < 3) throw MapError(tag + ": polygon needs at least 3 vertices");
      if (!is_convex_ccw(a.polygon)) throw MapError(tag + ": polygon must be convex and counter-clockwise");
      if (a.speed_limit && !(*a.speed_limit > 0.0)) throw MapError(tag + ": speed_limit must be positive");
      if (a.parent) {
        const Area& parent = area(*a.parent);
        for (Vec2 v : a.polygon) {
          if (!contains(parent.polygon, v, kMapTolerance)) {
            throw MapError(tag + ": polygon leaves parent area " + std::to_string(parent.id.value));
          }
        }
      }
    }
    for (const auto& a : areas_) {
      for (std::size_t i = 0; i < a.children.size(); ++i) {
        for (std::size_t j = i + 1; j < a.children.size(); ++j) {
          if (interiors_overlap(area(a.children[i]).polygon, area(a.children[j]).polygon)) {
            throw MapError("sibling areas " + std::to_string(a.children[i].value) + " and " +
                           std::to_string(a.children[j].value) + " overlap");
          }
        }
      }
    }
    for (const auto& b : boundaries_) {
      const std::string tag = "boundary " + std::to_string(b.id.value);
      if (b.owners.empty()) throw MapError(tag + ": needs at least one owner area");
      for (AreaId o : b.owners) {
        if (!has_area(o)) throw MapError(tag + ": unknown owner area " + std::to_string(o.value));
      }
      if (b.segments.empty()) throw MapError(tag + ": has no segments");
      for (const auto& s : b.segments) {
        if (s.length() <= kMapTolerance) throw MapError(tag + ": zero-length segment");
      }
    }
    for (const auto& itf : interfaces_) {
      const std::string tag = "interface " + std::to_string(itf.id.value);
      if (itf.connects.empty() || itf.connects.size() > 2) throw MapError(tag + ": must connect one or two areas");
      if (itf.connects.size() == 2 && itf.connects[0] == itf.connects[1]) {
        throw MapError(tag + ": connects an area to itself");
      }
      if (itf.segment.length() <= kMapTolerance) throw MapError(tag + ": zero-length segment");
      for (AreaId a : itf.connects) {
        if (!has_area(a)) throw MapError(tag + ": dangling reference to area " + std::to_string(a.value));
        const Polygon& poly = area(a).polygon;
        for (Vec2 p : {itf.segment.a, itf.segment.b, itf.segment.midpoint()}) {
          if (boundary_distance(poly, p) > kMapTolerance) {
            throw MapError(tag + ": segment is not on the border of area " + std::to_string(a.value));
          }
        }
      }
    }
  }

  /// Separating-axis test on two convex polygons; touching does not count.
  static bool interiors_overlap(const Polygon& p, const Polygon& q) {
    auto separated_by_edges_of = [](const Polygon& a, const Polygon& b) {
      for (const auto& e : edges(a)) {
        const Vec2 n = normalized(perp(e.b - e.a));  // inward for ccw
        double max_b = -std::numeric_limits<double>::infinity();
        for (Vec2 v : b) max_b = std::max(max_b, dot(n, v - e.a));
        if (max_b <= kMapTolerance) return true;
      }
      return false;
    };
    return !(separated_by_edges_of(p, q) || separated_by_edges_of(q, p));
  }

  std::vector<Area> areas_;
  std::vector<Boundary> boundaries_;
  std::vector<Interface> interfaces_;
  std::map<AreaId, std::size_t> area_index_;
  std::map<BoundaryId, std::size_t> boundary_index_;
  std::map<InterfaceId, std::size_t> interface_index_;
  std::map<AreaId, AreaSet> sub_closure_;
  std::map<AreaId, AreaSet> super_closure_;
  std::map<AreaId, std::vector<InterfaceId>> adjacency_;
};

/// Active/inactive partition of the interfaces around an agent's claims.
struct InterfaceClassification {
  InterfaceSet active;
  InterfaceSet inactive;
};

/// An interface is active when it joins two consecutive route areas that are
/// both claimed; every other interface touching a claimed area is inactive.
inline InterfaceClassification classify_interfaces(const SemanticMap& map, const std::vector<AreaId>& route,
                                                   const AreaSet& claimed) {
  InterfaceClassification out;
  const AreaSet family = map.expand(claimed);
  for (std::size_t k = 0; k + 1 < route.size(); ++k) {
    if (!claimed.contains(route[k]) || !claimed.contains(route[k + 1])) continue;
    for (InterfaceId i : map.interfaces_between(route[k], route[k + 1])) out.active.insert(i);
  }
  for (AreaId a : family) {
    for (InterfaceId i : map.interfaces_of(a)) {
      if (!out.active.contains(i)) out.inactive.insert(i);
    }
  }
  return out;
}

/// A wall element for the optimizer: a vertex list (segments have two).
struct WallElement {
  std::vector<Vec2> vertices;
  bool is_virtual = false;  // an inactive interface standing in for a wall
  int source_id = -1;       // boundary id or interface id it came from
};

/// The constraint set for one agent: boundary segments of every claimed area
/// plus inactive interfaces of claimed areas as virtual walls.
inline std::vector<WallElement> boundaries_for_agent(const SemanticMap& map, const AreaSet& claimed,
                                                     const InterfaceSet& inactive) {
  std::vector<WallElement> out;
  const AreaSet family = map.expand(claimed);
  for (const auto& b : map.boundaries()) {
    const bool owned = std::any_of(b.owners.begin(), b.owners.end(), [&](AreaId o) { return family.contains(o); });
    if (!owned) continue;
    for (const auto& s : b.segments) out.push_back({{s.a, s.b}, false, b.id.value});
  }
  for (InterfaceId i : inactive) {
    const Interface& itf = map.interface(i);
    const bool touches = std::any_of(itf.connects.begin(), itf.connects.end(),
                                     [&](AreaId a) { return family.contains(a); });
    if (touches) out.push_back({{itf.segment.a, itf.segment.b}, true, i.value});
  }
  return out;
}

}  // namespace claimnav
