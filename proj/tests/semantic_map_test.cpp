#include <gtest/gtest.h>

#include <set>

#include "claimnav/maps.hpp"
#include "claimnav/semantic_map.hpp"

using namespace claimnav;

namespace {

AreaId area(const SemanticMap& m, const char* name) { return *m.find_area(name); }
InterfaceId itf(const SemanticMap& m, const char* name) { return *m.find_interface(name); }

// Descendants by walking parent links from every area; independent of the
// map's cached closures.
AreaSet descendants_oracle(const SemanticMap& m, AreaId root) {
  AreaSet out{root};
  for (const auto& a : m.areas()) {
    std::optional<AreaId> p = a.id;
    while (p) {
      if (*p == root) out.insert(a.id);
      p = m.area(*p).parent;
    }
  }
  return out;
}

SemanticMap nested_three() {
  std::vector<Area> areas{
      {AreaId{0}, "A", rect(0, 0, 4, 4), {}, {}, {}},
      {AreaId{1}, "B", rect(1, 1, 3, 3), AreaId{0}, {}, {}},
      {AreaId{2}, "C", rect(1.5, 1.5, 2.5, 2.5), AreaId{1}, {}, {}},
  };
  return SemanticMap(std::move(areas), {}, {});
}

}  // namespace

TEST(SemanticMap, TJunctionShape) {
  const auto m = make_tjunction();
  EXPECT_EQ(m.top_level_areas().size(), 4u);
  EXPECT_EQ(m.interfaces().size(), 6u);
  EXPECT_TRUE(m.top_level_connected());
}

TEST(SemanticMap, SingleSquareMapIsValid) {
  SemanticMap m({{AreaId{0}, "only", rect(0, 0, 1, 1), {}, {}, {}}}, {}, {});
  EXPECT_EQ(m.areas().size(), 1u);
  EXPECT_TRUE(m.top_level_connected());
}

TEST(SemanticMap, RejectsInterfaceOffBorder) {
  std::vector<Area> areas{{AreaId{0}, "a", rect(0, 0, 1, 1), {}, {}, {}}, {AreaId{1}, "b", rect(1, 0, 2, 1), {}, {}, {}}};
  std::vector<Interface> itfs{{InterfaceId{0}, "x", {{0.5, 0}, {0.5, 1}}, {AreaId{0}, AreaId{1}}}};
  try {
    SemanticMap m(areas, {}, itfs);
    FAIL() << "expected MapError";
  } catch (const MapError& e) {
    EXPECT_NE(std::string(e.what()).find("interface 0"), std::string::npos) << e.what();
  }
}

TEST(SemanticMap, RejectsNonConvexAndCycles) {
  EXPECT_THROW(SemanticMap({{AreaId{0}, "a", {{0, 0}, {2, 0}, {1, 0.5}, {2, 2}, {0, 2}}, {}, {}, {}}}, {}, {}), MapError);
  EXPECT_THROW(SemanticMap({{AreaId{0}, "a", rect(0, 0, 1, 1), AreaId{1}, {}, {}},
                            {AreaId{1}, "b", rect(0, 0, 1, 1), AreaId{0}, {}, {}}},
                           {}, {}),
               MapError);
  EXPECT_THROW(SemanticMap({{AreaId{0}, "a", rect(0, 0, 1, 1), AreaId{7}, {}, {}}}, {}, {}), MapError);
  EXPECT_THROW(SemanticMap({{AreaId{0}, "a", rect(0, 0, 1, 1), {}, {}, {}}, {AreaId{0}, "b", rect(1, 0, 2, 1), {}, {}, {}}},
                           {}, {}),
               MapError);
}

TEST(SemanticMap, RejectsChildOutsideParentAndOverlappingSiblings) {
  EXPECT_THROW(SemanticMap({{AreaId{0}, "p", rect(0, 0, 1, 1), {}, {}, {}},
                            {AreaId{1}, "c", rect(0.5, 0.5, 1.5, 1.5), AreaId{0}, {}, {}}},
                           {}, {}),
               MapError);
  EXPECT_THROW(SemanticMap({{AreaId{0}, "p", rect(0, 0, 2, 2), {}, {}, {}},
                            {AreaId{1}, "c1", rect(0, 0, 1.2, 2), AreaId{0}, {}, {}},
                            {AreaId{2}, "c2", rect(0.8, 0, 2, 2), AreaId{0}, {}, {}}},
                           {}, {}),
               MapError);
}

TEST(SemanticMap, RejectsBadBoundaries) {
  std::vector<Area> areas{{AreaId{0}, "a", rect(0, 0, 1, 1), {}, {}, {}}};
  EXPECT_THROW(SemanticMap(areas, {{BoundaryId{0}, {{{0, 0}, {1, 0}}}, {AreaId{5}}}}, {}), MapError);
  EXPECT_THROW(SemanticMap(areas, {{BoundaryId{0}, {{{0, 0}, {0, 0}}}, {AreaId{0}}}}, {}), MapError);
  EXPECT_THROW(SemanticMap(areas, {{BoundaryId{0}, {{{0, 0}, {1, 0}}}, {}}}, {}), MapError);
}

TEST(SemanticMap, SubClosure) {
  const auto m = make_lanes();
  EXPECT_EQ(m.sub_closure(area(m, "S_0")), (AreaSet{area(m, "S_0"), area(m, "S_00"), area(m, "S_01")}));
  EXPECT_EQ(m.sub_closure(area(m, "S_2")), AreaSet{area(m, "S_2")});
  const auto n = nested_three();
  EXPECT_EQ(n.sub_closure(AreaId{0}), descendants_oracle(n, AreaId{0}));
  EXPECT_EQ(n.sub_closure(AreaId{0}), (AreaSet{AreaId{0}, AreaId{1}, AreaId{2}}));
}

TEST(SemanticMap, SuperClosure) {
  const auto m = make_lanes();
  EXPECT_EQ(m.super_closure(area(m, "S_00")), (AreaSet{area(m, "S_00"), area(m, "S_0")}));
  EXPECT_EQ(m.super_closure(area(m, "S_1")), AreaSet{area(m, "S_1")});
  const auto n = nested_three();
  EXPECT_EQ(n.super_closure(AreaId{2}), (AreaSet{AreaId{0}, AreaId{1}, AreaId{2}}));
}

TEST(SemanticMap, ClosuresAreMutuallyConsistent) {
  for (const auto& m : {make_lanes(), nested_three(), make_tjunction(), make_corridor()}) {
    for (const auto& a : m.areas()) {
      EXPECT_EQ(m.sub_closure(a.id), descendants_oracle(m, a.id));
      for (const auto& b : m.areas()) {
        EXPECT_EQ(m.sub_closure(a.id).contains(b.id), m.super_closure(b.id).contains(a.id));
      }
    }
  }
}

TEST(SemanticMap, ClassifyFig2AllClaimed) {
  const auto m = make_tjunction();
  const std::vector<AreaId> route{area(m, "S_3"), area(m, "S_1"), area(m, "S_2")};
  const auto c = classify_interfaces(m, route, AreaSet(route));
  EXPECT_EQ(c.active, (InterfaceSet{itf(m, "I_4"), itf(m, "I_2")}));
  EXPECT_EQ(c.inactive, (InterfaceSet{itf(m, "I_5"), itf(m, "I_3"), itf(m, "I_1")}));
}

TEST(SemanticMap, ClassifyOnlyCurrentClaimed) {
  const auto m = make_tjunction();
  const std::vector<AreaId> route{area(m, "S_3"), area(m, "S_1"), area(m, "S_2")};
  const auto c = classify_interfaces(m, route, AreaSet{area(m, "S_3")});
  EXPECT_TRUE(c.active.empty());
  EXPECT_TRUE(c.inactive.contains(itf(m, "I_4")));
  const auto single = classify_interfaces(m, {area(m, "S_1")}, AreaSet{area(m, "S_1")});
  EXPECT_TRUE(single.active.empty());
  EXPECT_EQ(single.inactive, (InterfaceSet{itf(m, "I_1"), itf(m, "I_2"), itf(m, "I_4")}));
  EXPECT_TRUE(classify_interfaces(m, route, AreaSet{}).inactive.empty());
}

TEST(SemanticMap, ClassificationPartitionsIncidentInterfaces) {
  for (const auto& m : {make_tjunction(), make_lanes(), make_corridor(), make_room_grid({})}) {
    const auto& as = m.areas();
    for (std::size_t i = 0; i < as.size(); ++i) {
      for (std::size_t j = 0; j < as.size(); ++j) {
        const std::vector<AreaId> route{as[i].id, as[j].id};
        for (int mask = 0; mask < 4; ++mask) {
          AreaSet claimed;
          if (mask & 1) claimed.insert(as[i].id);
          if (mask & 2) claimed.insert(as[j].id);
          const auto c = classify_interfaces(m, route, claimed);
          EXPECT_FALSE(c.active.intersects(c.inactive));
          InterfaceSet incident;
          for (AreaId a : m.expand(claimed)) {
            for (InterfaceId x : m.interfaces_of(a)) incident.insert(x);
          }
          InterfaceSet both = c.active;
          both.insert_all(c.inactive);
          EXPECT_EQ(both, incident);
          const auto walls = boundaries_for_agent(m, claimed, c.inactive);
          for (const auto& w : walls) {
            if (w.is_virtual) {
              EXPECT_FALSE(c.active.contains(InterfaceId{w.source_id}));
            }
          }
        }
      }
    }
  }
}

TEST(SemanticMap, BoundariesForAgentOnlyCurrentClaimed) {
  const auto m = make_tjunction();
  const AreaId s1 = area(m, "S_1");
  const auto c = classify_interfaces(m, {s1}, AreaSet{s1});
  const auto walls = boundaries_for_agent(m, AreaSet{s1}, c.inactive);
  std::set<int> physical;
  std::set<int> virt;
  for (const auto& w : walls) (w.is_virtual ? virt : physical).insert(w.source_id);
  std::set<int> expect_phys;
  for (BoundaryId b : m.boundaries_of(s1)) expect_phys.insert(b.value);
  std::set<int> expect_virt;
  for (InterfaceId i : m.interfaces_of(s1)) expect_virt.insert(i.value);
  EXPECT_EQ(physical, expect_phys);
  EXPECT_EQ(virt, expect_virt);
  EXPECT_FALSE(physical.empty());
}

TEST(SemanticMap, BoundariesForAgentExcludeActiveInterfaces) {
  const auto m = make_tjunction();
  const std::vector<AreaId> route{area(m, "S_3"), area(m, "S_1"), area(m, "S_2")};
  const auto c = classify_interfaces(m, route, AreaSet(route));
  const auto walls = boundaries_for_agent(m, AreaSet(route), c.inactive);
  for (const auto& w : walls) {
    if (!w.is_virtual) continue;
    EXPECT_NE(w.source_id, itf(m, "I_4").value);
    EXPECT_NE(w.source_id, itf(m, "I_2").value);
  }
}

TEST(SemanticMap, BoundariesForAgentAllClaimedIsPhysicalOnly) {
  const auto m = make_corridor();
  AreaSet all;
  for (const auto& a : m.areas()) all.insert(a.id);
  const auto walls = boundaries_for_agent(m, all, {});
  EXPECT_EQ(walls.size(), m.all_wall_segments().size());
  for (const auto& w : walls) EXPECT_FALSE(w.is_virtual);
}

TEST(SemanticMap, PointInArea) {
  const auto t = make_tjunction();
  EXPECT_EQ(t.point_in_area({-3.0, 2.5}), std::vector<AreaId>{area(t, "S_1")});
  EXPECT_TRUE(t.point_in_area({10, 10}).empty());
  const auto m = make_lanes();
  EXPECT_EQ(m.point_in_area({-3.25, 0.0}), (std::vector<AreaId>{area(m, "S_0"), area(m, "S_00")}));
}

TEST(SemanticMap, PointInAreaRespectsContainment) {
  const auto m = make_lanes();
  for (double x = -3.6; x <= -2.4; x += 0.05) {
    for (double y = -2.1; y <= 3.1; y += 0.1) {
      const auto hits = m.point_in_area({x, y});
      for (AreaId a : hits) {
        if (auto p = m.area(a).parent) {
          EXPECT_NE(std::find(hits.begin(), hits.end(), *p), hits.end());
        }
      }
    }
  }
}

TEST(SemanticMap, InterfacesBetweenFollowsFamilies) {
  const auto m = make_lanes();
  const auto between = m.interfaces_between(area(m, "S_0"), area(m, "S_1"));
  EXPECT_EQ(between.size(), 3u);  // I_1 plus the two lane interfaces
  EXPECT_EQ(m.interfaces_between(area(m, "S_00"), area(m, "S_1")), std::vector<InterfaceId>{itf(m, "I_10")});
  EXPECT_TRUE(m.interfaces_between(area(m, "S_0"), area(m, "S_2")).empty());
}

TEST(SemanticMap, RoomGridIsConnected) {
  const auto m = make_room_grid({4, 3, 1.6, 0.8, 0.6, {{0, 1}}});
  EXPECT_TRUE(m.top_level_connected());
  EXPECT_EQ(m.top_level_areas().size(), 12u + 16u);
}
