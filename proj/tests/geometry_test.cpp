#include <gtest/gtest.h>

#include <random>

#include "claimnav/geometry.hpp"

using namespace claimnav;

TEST(Geometry, PointSegmentDistance) {
  const Segment s{{0, 0}, {2, 0}};
  EXPECT_DOUBLE_EQ(point_segment_distance({1, 1}, s), 1.0);
  EXPECT_DOUBLE_EQ(point_segment_distance({-3, 4}, s), 5.0);
  EXPECT_DOUBLE_EQ(point_segment_distance({2, 0}, s), 0.0);
}

TEST(Geometry, SegmentIntersection) {
  EXPECT_TRUE(segments_intersect({{0, 0}, {2, 2}}, {{0, 2}, {2, 0}}));
  EXPECT_FALSE(segments_intersect({{0, 0}, {1, 0}}, {{0, 1}, {1, 1}}));
  EXPECT_TRUE(segments_intersect({{0, 0}, {1, 0}}, {{1, 0}, {1, 1}}));
  EXPECT_DOUBLE_EQ(segment_segment_distance({{0, 0}, {1, 0}}, {{0, 1}, {1, 1}}), 1.0);
  EXPECT_DOUBLE_EQ(segment_segment_distance({{0, 0}, {2, 2}}, {{0, 2}, {2, 0}}), 0.0);
}

TEST(Geometry, ConvexityAndContainment) {
  const Polygon sq{{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  EXPECT_TRUE(is_convex_ccw(sq));
  EXPECT_FALSE(is_convex_ccw(Polygon{{0, 0}, {0, 1}, {1, 1}, {1, 0}}));
  EXPECT_FALSE(is_convex_ccw(Polygon{{0, 0}, {2, 0}, {1, 0.5}, {2, 2}, {0, 2}}));
  EXPECT_TRUE(contains(sq, {0.5, 0.5}));
  EXPECT_TRUE(contains(sq, {1.0, 0.5}));
  EXPECT_FALSE(contains(sq, {1.1, 0.5}));
  EXPECT_NEAR(inner_clearance(sq, {0.5, 0.5}), 0.5, 1e-12);
  EXPECT_NEAR(polygon_distance(sq, {2, 0.5}), 1.0, 1e-12);
  EXPECT_NEAR(signed_area(sq), 1.0, 1e-12);
  const Vec2 c = centroid(sq);
  EXPECT_NEAR(c.x, 0.5, 1e-12);
  EXPECT_NEAR(c.y, 0.5, 1e-12);
}

TEST(Geometry, ConvexHull) {
  const auto hull = convex_hull({{0, 0}, {1, 0}, {0.5, 0.2}, {1, 1}, {0, 1}, {0.5, 0.5}});
  EXPECT_EQ(hull.size(), 4u);
  EXPECT_TRUE(is_convex_ccw(hull));
}

TEST(Geometry, HullSegmentDistanceMatchesPairwiseMinimum) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-2, 2);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<Vec2> pts;
    const int n = 1 + trial % 6;
    for (int i = 0; i < n; ++i) pts.push_back({u(rng), u(rng)});
    const Segment s{{u(rng) + 3, u(rng)}, {u(rng) + 3, u(rng)}};
    Vec2 ph, ps;
    const double d = hull_segment_distance(pts, s, &ph, &ps);
    // Brute force: hull boundary edges (and points) against the segment.
    const auto hull = convex_hull(pts);
    double best = 1e300;
    bool inside = false;
    for (std::size_t i = 0; i < hull.size(); ++i) {
      const Segment e{hull[i], hull[(i + 1) % hull.size()]};
      best = std::min(best, segment_segment_distance(e, s));
    }
    if (hull.size() >= 3) inside = contains(hull, s.a) || contains(hull, s.b);
    if (inside) best = 0.0;
    EXPECT_NEAR(d, best, 1e-9) << "trial " << trial;
    if (d > 0) {
      EXPECT_NEAR(distance(ph, ps), d, 1e-9);
    }
  }
}

TEST(Geometry, WrapAngle) {
  EXPECT_NEAR(wrap_angle(3 * M_PI), M_PI, 1e-12);
  EXPECT_NEAR(wrap_angle(-M_PI), M_PI, 1e-12);
  EXPECT_NEAR(wrap_angle(0.5), 0.5, 1e-12);
  EXPECT_NEAR(wrap_angle(-7.0), -7.0 + 2 * M_PI, 1e-12);
}
