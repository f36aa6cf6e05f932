#pragma once
// Builders for the bundled environments: the narrow-corridor deadlock map,
// the T-junction, the lane-split map with sub-areas, and room grids joined by
// corridors that stand in for the larger validation environments.

#include <string>
#include <vector>

#include "claimnav/semantic_map.hpp"

namespace claimnav {

inline Polygon rect(double x0, double y0, double x1, double y1) {
  return {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}};
}

/// Wall segments of each listed area: its edges minus the interfaces lying on
/// them. Segments shared by several areas become one boundary with several
/// owners. Boundary ids start at `first_id`.
inline std::vector<Boundary> derive_boundaries(const std::vector<Area>& areas, const std::vector<Interface>& interfaces,
                                               const std::vector<AreaId>& which, int first_id = 0) {
  constexpr double tol = 1e-9;
  struct Piece {
    Segment seg;
    std::vector<AreaId> owners;
  };
  std::vector<Piece> pieces;
  for (AreaId id : which) {
    const Area* area = nullptr;
    for (const auto& a : areas) {
      if (a.id == id) area = &a;
    }
    if (!area) continue;
    for (const auto& e : edges(area->polygon)) {
      const Vec2 d = e.b - e.a;
      const double len2 = dot(d, d);
      std::vector<std::pair<double, double>> cuts;
      for (const auto& itf : interfaces) {
        if (!itf.connects_area(id)) continue;
        if (point_segment_distance(itf.segment.a, e) > 1e-7 || point_segment_distance(itf.segment.b, e) > 1e-7) continue;
        double t0 = dot(itf.segment.a - e.a, d) / len2;
        double t1 = dot(itf.segment.b - e.a, d) / len2;
        if (t0 > t1) std::swap(t0, t1);
        cuts.emplace_back(t0, t1);
      }
      std::sort(cuts.begin(), cuts.end());
      double t = 0.0;
      auto emit = [&](double s0, double s1) {
        if ((s1 - s0) * std::sqrt(len2) <= 1e-7) return;
        Segment seg{e.a + d * s0, e.a + d * s1};
        for (auto& p : pieces) {
          const bool same = (distance(p.seg.a, seg.a) < tol && distance(p.seg.b, seg.b) < tol) ||
                            (distance(p.seg.a, seg.b) < tol && distance(p.seg.b, seg.a) < tol);
          if (same) {
            p.owners.push_back(id);
            return;
          }
        }
        pieces.push_back({seg, {id}});
      };
      for (const auto& [c0, c1] : cuts) {
        emit(t, c0);
        t = std::max(t, c1);
      }
      emit(t, 1.0);
    }
  }
  std::vector<Boundary> out;
  int next = first_id;
  for (auto& p : pieces) out.push_back({BoundaryId{next++}, {p.seg}, p.owners});
  return out;
}

/// Four areas S_0..S_3 meeting at a T; I_0, I_3 and I_5 are exits.
inline SemanticMap make_tjunction() {
  std::vector<Area> areas{
      {AreaId{0}, "S_0", rect(-3.5, 0.55, -2.5, 2.0), {}, {}, {}},
      {AreaId{1}, "S_1", rect(-3.5, 2.0, -2.5, 3.0), {}, {}, {}},
      {AreaId{2}, "S_2", rect(-2.5, 2.0, -0.35, 3.0), {}, {}, {}},
      {AreaId{3}, "S_3", rect(-5.5, 2.0, -3.5, 3.0), {}, {}, {}},
  };
  std::vector<Interface> itfs{
      {InterfaceId{0}, "I_0", {{-3.5, 0.55}, {-2.5, 0.55}}, {AreaId{0}}},
      {InterfaceId{1}, "I_1", {{-3.5, 2.0}, {-2.5, 2.0}}, {AreaId{0}, AreaId{1}}},
      {InterfaceId{2}, "I_2", {{-2.5, 2.0}, {-2.5, 3.0}}, {AreaId{1}, AreaId{2}}},
      {InterfaceId{3}, "I_3", {{-0.35, 2.0}, {-0.35, 3.0}}, {AreaId{2}}},
      {InterfaceId{4}, "I_4", {{-3.5, 3.0}, {-3.5, 2.0}}, {AreaId{3}, AreaId{1}}},
      {InterfaceId{5}, "I_5", {{-5.5, 3.0}, {-5.5, 2.0}}, {AreaId{3}}},
  };
  auto walls = derive_boundaries(areas, itfs, {AreaId{0}, AreaId{1}, AreaId{2}, AreaId{3}});
  return SemanticMap(std::move(areas), std::move(walls), std::move(itfs));
}

/// A junction J with arms L and R above a corridor C too narrow for two
/// agents to pass, ending in a room B.
inline SemanticMap make_corridor() {
  std::vector<Area> areas{
      {AreaId{0}, "L", rect(0.0, 3.0, 2.0, 4.0), {}, {}, {}},
      {AreaId{1}, "J", rect(2.0, 3.0, 3.0, 4.0), {}, {}, {}},
      {AreaId{2}, "R", rect(3.0, 3.0, 5.0, 4.0), {}, {}, {}},
      {AreaId{3}, "C", rect(2.2, 0.6, 2.8, 3.0), {}, {}, {}},
      {AreaId{4}, "B", rect(1.9, -0.6, 3.1, 0.6), {}, {}, {}},
  };
  std::vector<Interface> itfs{
      {InterfaceId{0}, "I_LJ", {{2.0, 3.0}, {2.0, 4.0}}, {AreaId{0}, AreaId{1}}},
      {InterfaceId{1}, "I_JR", {{3.0, 3.0}, {3.0, 4.0}}, {AreaId{1}, AreaId{2}}},
      {InterfaceId{2}, "I_JC", {{2.2, 3.0}, {2.8, 3.0}}, {AreaId{1}, AreaId{3}}},
      {InterfaceId{3}, "I_CB", {{2.2, 0.6}, {2.8, 0.6}}, {AreaId{3}, AreaId{4}}},
  };
  auto walls = derive_boundaries(areas, itfs, {AreaId{0}, AreaId{1}, AreaId{2}, AreaId{3}, AreaId{4}});
  return SemanticMap(std::move(areas), std::move(walls), std::move(itfs));
}

/// Super-area S_0 split into lanes S_00 and S_01, joined to S_1 and S_2.
inline SemanticMap make_lanes() {
  std::vector<Area> areas{
      {AreaId{0}, "S_0", rect(-3.5, -2.0, -2.5, 2.0), {}, {}, {}},
      {AreaId{1}, "S_1", rect(-3.5, 2.0, -2.5, 3.0), {}, {}, {}},
      {AreaId{2}, "S_2", rect(-2.5, 2.0, 0.5, 3.0), {}, {}, {}},
      {AreaId{3}, "S_00", rect(-3.5, -2.0, -3.0, 2.0), AreaId{0}, {}, {}},
      {AreaId{4}, "S_01", rect(-3.0, -2.0, -2.5, 2.0), AreaId{0}, {}, {}},
  };
  std::vector<Interface> itfs{
      {InterfaceId{0}, "I_0", {{-3.5, -2.0}, {-2.5, -2.0}}, {AreaId{0}}},
      {InterfaceId{1}, "I_1", {{-3.5, 2.0}, {-2.5, 2.0}}, {AreaId{0}, AreaId{1}}},
      {InterfaceId{2}, "I_2", {{-2.5, 2.0}, {-2.5, 3.0}}, {AreaId{1}, AreaId{2}}},
      {InterfaceId{3}, "I_3", {{0.5, 2.0}, {0.5, 3.0}}, {AreaId{2}}},
      {InterfaceId{4}, "I_10", {{-3.5, 2.0}, {-3.0, 2.0}}, {AreaId{3}, AreaId{1}}},
      {InterfaceId{5}, "I_11", {{-3.0, 2.0}, {-2.5, 2.0}}, {AreaId{4}, AreaId{1}}},
  };
  std::vector<Boundary> walls{
      {BoundaryId{0}, {{{-3.5, -2.0}, {-3.5, 2.0}}}, {AreaId{0}, AreaId{3}}},   // W_0
      {BoundaryId{1}, {{{-2.5, -2.0}, {-2.5, 2.0}}}, {AreaId{0}, AreaId{4}}},   // W_1
      {BoundaryId{2}, {{{-2.5, 3.0}, {0.5, 3.0}}}, {AreaId{2}}},                // W_2
      {BoundaryId{3}, {{{-2.5, 2.0}, {0.5, 2.0}}}, {AreaId{2}}},                // W_3
      {BoundaryId{4}, {{{-3.5, 3.0}, {-2.5, 3.0}}}, {AreaId{1}}},               // W_4
      {BoundaryId{5}, {{{-3.5, 2.0}, {-3.5, 3.0}}}, {AreaId{1}}},               // W_5
      {BoundaryId{6}, {{{-3.0, -2.0}, {-3.0, 2.0}}}, {AreaId{3}, AreaId{4}}},   // W_01
  };
  return SemanticMap(std::move(areas), std::move(walls), std::move(itfs));
}

struct RoomGridOptions {
  int cols = 3;
  int rows = 3;
  double room = 1.6;            // room side length
  double gap = 0.8;             // corridor length between rooms
  double corridor_width = 0.6;  // narrow enough that agents cannot pass
  /// Corridors to leave out, as (room index, room index) pairs with row-major
  /// room indices.
  std::vector<std::pair<int, int>> missing;
};

/// Square rooms on a grid, neighbours joined by straight corridors. Rooms get
/// ids 0..cols*rows-1 (row-major); corridors follow.
inline SemanticMap make_room_grid(const RoomGridOptions& opt) {
  std::vector<Area> areas;
  std::vector<Interface> itfs;
  const double pitch = opt.room + opt.gap;
  auto room_index = [&](int c, int r) { return r * opt.cols + c; };
  for (int r = 0; r < opt.rows; ++r) {
    for (int c = 0; c < opt.cols; ++c) {
      const double x0 = c * pitch;
      const double y0 = r * pitch;
      areas.push_back({AreaId{room_index(c, r)}, "room_" + std::to_string(c) + "_" + std::to_string(r),
                       rect(x0, y0, x0 + opt.room, y0 + opt.room), {}, {}, {}});
    }
  }
  auto is_missing = [&](int a, int b) {
    for (auto [x, y] : opt.missing) {
      if ((x == a && y == b) || (x == b && y == a)) return true;
    }
    return false;
  };
  int next_area = opt.cols * opt.rows;
  int next_itf = 0;
  const double hw = opt.corridor_width / 2.0;
  for (int r = 0; r < opt.rows; ++r) {
    for (int c = 0; c < opt.cols; ++c) {
      const double x0 = c * pitch;
      const double y0 = r * pitch;
      const double mx = x0 + opt.room / 2.0;
      const double my = y0 + opt.room / 2.0;
      if (c + 1 < opt.cols && !is_missing(room_index(c, r), room_index(c + 1, r))) {
        const AreaId id{next_area++};
        const double xa = x0 + opt.room;
        const double xb = xa + opt.gap;
        areas.push_back({id, "corr_" + std::to_string(room_index(c, r)) + "_" + std::to_string(room_index(c + 1, r)),
                         rect(xa, my - hw, xb, my + hw), {}, {}, {}});
        itfs.push_back({InterfaceId{next_itf++}, "", {{xa, my - hw}, {xa, my + hw}}, {AreaId{room_index(c, r)}, id}});
        itfs.push_back({InterfaceId{next_itf++}, "", {{xb, my - hw}, {xb, my + hw}}, {id, AreaId{room_index(c + 1, r)}}});
      }
      if (r + 1 < opt.rows && !is_missing(room_index(c, r), room_index(c, r + 1))) {
        const AreaId id{next_area++};
        const double ya = y0 + opt.room;
        const double yb = ya + opt.gap;
        areas.push_back({id, "corr_" + std::to_string(room_index(c, r)) + "_" + std::to_string(room_index(c, r + 1)),
                         rect(mx - hw, ya, mx + hw, yb), {}, {}, {}});
        itfs.push_back({InterfaceId{next_itf++}, "", {{mx - hw, ya}, {mx + hw, ya}}, {AreaId{room_index(c, r)}, id}});
        itfs.push_back({InterfaceId{next_itf++}, "", {{mx - hw, yb}, {mx + hw, yb}}, {id, AreaId{room_index(c, r + 1)}}});
      }
    }
  }
  std::vector<AreaId> all;
  for (const auto& a : areas) all.push_back(a.id);
  auto walls = derive_boundaries(areas, itfs, all);
  return SemanticMap(std::move(areas), std::move(walls), std::move(itfs));
}

struct WarehouseOptions {
  int cols = 4;
  int rows = 3;
  double hub = 1.2;             // junction room side length
  double bay = 1.0;             // bay side length
  double gap = 0.6;             // corridor length
  double corridor_width = 0.6;  // single lane
};

/// Junction rooms on a grid joined by single-lane corridors, with one
/// dead-end bay off every outward-facing hub side. Hubs get ids
/// 0..cols*rows-1 (row-major), then bays counter-clockwise from the bottom
/// left, then corridors.
inline SemanticMap make_warehouse(const WarehouseOptions& opt) {
  std::vector<Area> areas;
  std::vector<Interface> itfs;
  const double pitch = opt.hub + opt.gap;
  const double hw = opt.corridor_width / 2.0;
  auto hub_index = [&](int c, int r) { return r * opt.cols + c; };
  for (int r = 0; r < opt.rows; ++r) {
    for (int c = 0; c < opt.cols; ++c) {
      areas.push_back({AreaId{hub_index(c, r)}, "hub_" + std::to_string(c) + "_" + std::to_string(r),
                       rect(c * pitch, r * pitch, c * pitch + opt.hub, r * pitch + opt.hub), {}, {}, {}});
    }
  }
  // (hub, outward direction) per bay.
  std::vector<std::pair<int, Vec2>> bays;
  for (int c = 0; c < opt.cols; ++c) bays.emplace_back(hub_index(c, 0), Vec2{0, -1});
  for (int r = 0; r < opt.rows; ++r) bays.emplace_back(hub_index(opt.cols - 1, r), Vec2{1, 0});
  for (int c = opt.cols; c-- > 0;) bays.emplace_back(hub_index(c, opt.rows - 1), Vec2{0, 1});
  for (int r = opt.rows; r-- > 0;) bays.emplace_back(hub_index(0, r), Vec2{-1, 0});
  const int first_bay = opt.cols * opt.rows;
  for (std::size_t k = 0; k < bays.size(); ++k) {
    const auto [h, d] = bays[k];
    const Vec2 center = centroid(areas[h].polygon) + d * (opt.hub / 2.0 + opt.gap + opt.bay / 2.0);
    const double b = opt.bay / 2.0;
    areas.push_back({AreaId{first_bay + static_cast<int>(k)}, "bay_" + std::to_string(k),
                     rect(center.x - b, center.y - b, center.x + b, center.y + b), {}, {}, {}});
  }
  int next_area = first_bay + static_cast<int>(bays.size());
  int next_itf = 0;
  // Corridor from the side of room `a` facing `d` to room `b`.
  auto connect = [&](int a, int b, Vec2 d) {
    const Vec2 ca = centroid(areas[a].polygon);
    const double half_a = d.x != 0 ? (areas[a].polygon[1].x - areas[a].polygon[0].x) / 2.0
                                   : (areas[a].polygon[2].y - areas[a].polygon[1].y) / 2.0;
    const Vec2 p0 = ca + d * half_a;
    const Vec2 p1 = p0 + d * opt.gap;
    const Vec2 side = perp(d) * hw;
    const AreaId id{next_area++};
    const double x0 = std::min(p0.x, p1.x) - std::abs(side.x), x1 = std::max(p0.x, p1.x) + std::abs(side.x);
    const double y0 = std::min(p0.y, p1.y) - std::abs(side.y), y1 = std::max(p0.y, p1.y) + std::abs(side.y);
    areas.push_back({id, "corr_" + std::to_string(a) + "_" + std::to_string(b), rect(x0, y0, x1, y1), {}, {}, {}});
    itfs.push_back({InterfaceId{next_itf++}, "", {p0 - side, p0 + side}, {AreaId{a}, id}});
    itfs.push_back({InterfaceId{next_itf++}, "", {p1 - side, p1 + side}, {id, AreaId{b}}});
  };
  for (int r = 0; r < opt.rows; ++r) {
    for (int c = 0; c < opt.cols; ++c) {
      if (c + 1 < opt.cols) connect(hub_index(c, r), hub_index(c + 1, r), {1, 0});
      if (r + 1 < opt.rows) connect(hub_index(c, r), hub_index(c, r + 1), {0, 1});
    }
  }
  for (std::size_t k = 0; k < bays.size(); ++k) connect(bays[k].first, first_bay + static_cast<int>(k), bays[k].second);
  std::vector<AreaId> all;
  for (const auto& a : areas) all.push_back(a.id);
  auto walls = derive_boundaries(areas, itfs, all);
  return SemanticMap(std::move(areas), std::move(walls), std::move(itfs));
}

}  // namespace claimnav
