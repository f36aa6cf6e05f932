#pragma once
// Planar geometry used by the semantic map, the MPC wall constraints and the
// simulator's collision checks. Everything is in meters, world frame.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

namespace claimnav {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  constexpr Vec2() = default;
  constexpr Vec2(double x_, double y_) : x(x_), y(y_) {}

  constexpr Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  constexpr Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  constexpr Vec2 operator*(double s) const { return {x * s, y * s}; }
  constexpr Vec2 operator/(double s) const { return {x / s, y / s}; }
  constexpr Vec2 operator-() const { return {-x, -y}; }
  constexpr Vec2& operator+=(Vec2 o) { x += o.x; y += o.y; return *this; }
  constexpr Vec2& operator-=(Vec2 o) { x -= o.x; y -= o.y; return *this; }
  constexpr bool operator==(const Vec2&) const = default;
};

constexpr Vec2 operator*(double s, Vec2 v) { return v * s; }
constexpr double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
constexpr double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 v) { return std::hypot(v.x, v.y); }
inline double distance(Vec2 a, Vec2 b) { return norm(a - b); }
constexpr Vec2 perp(Vec2 v) { return {-v.y, v.x}; }

inline Vec2 normalized(Vec2 v) {
  const double n = norm(v);
  return n > 0.0 ? v / n : Vec2{};
}

struct Segment {
  Vec2 a;
  Vec2 b;

  Vec2 midpoint() const { return (a + b) * 0.5; }
  double length() const { return distance(a, b); }
  bool operator==(const Segment&) const = default;
};

using Polygon = std::vector<Vec2>;

/// Closest point on segment `s` to `p`.
inline Vec2 closest_point(const Segment& s, Vec2 p) {
  const Vec2 d = s.b - s.a;
  const double len2 = dot(d, d);
  if (len2 <= 0.0) return s.a;
  const double t = std::clamp(dot(p - s.a, d) / len2, 0.0, 1.0);
  return s.a + d * t;
}

inline double point_segment_distance(Vec2 p, const Segment& s) {
  return distance(p, closest_point(s, p));
}

/// Sign of the turn a->b->c with a relative tolerance; 0 means collinear.
inline int orientation(Vec2 a, Vec2 b, Vec2 c, double eps = 1e-12) {
  const double v = cross(b - a, c - a);
  if (v > eps) return 1;
  if (v < -eps) return -1;
  return 0;
}

inline bool on_segment(Vec2 p, const Segment& s, double tol) {
  return point_segment_distance(p, s) <= tol;
}

/// Closed-segment intersection test (touching counts).
inline bool segments_intersect(const Segment& s, const Segment& t) {
  const int o1 = orientation(s.a, s.b, t.a);
  const int o2 = orientation(s.a, s.b, t.b);
  const int o3 = orientation(t.a, t.b, s.a);
  const int o4 = orientation(t.a, t.b, s.b);
  if (o1 != o2 && o3 != o4) return true;
  constexpr double tol = 1e-12;
  return (o1 == 0 && on_segment(t.a, s, tol)) || (o2 == 0 && on_segment(t.b, s, tol)) ||
         (o3 == 0 && on_segment(s.a, t, tol)) || (o4 == 0 && on_segment(s.b, t, tol));
}

inline double segment_segment_distance(const Segment& s, const Segment& t) {
  if (segments_intersect(s, t)) return 0.0;
  return std::min({point_segment_distance(s.a, t), point_segment_distance(s.b, t),
                   point_segment_distance(t.a, s), point_segment_distance(t.b, s)});
}

inline double signed_area(std::span<const Vec2> poly) {
  double a = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    a += cross(poly[i], poly[(i + 1) % poly.size()]);
  }
  return 0.5 * a;
}

inline std::vector<Segment> edges(std::span<const Vec2> poly) {
  std::vector<Segment> out;
  out.reserve(poly.size());
  for (std::size_t i = 0; i < poly.size(); ++i) out.push_back({poly[i], poly[(i + 1) % poly.size()]});
  return out;
}

/// True for a counter-clockwise, strictly convex polygon (collinear vertices
/// are tolerated; repeated vertices are not).
inline bool is_convex_ccw(std::span<const Vec2> poly, double tol = 1e-9) {
  if (poly.size() < 3) return false;
  if (signed_area(poly) <= tol) return false;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Vec2 a = poly[i];
    const Vec2 b = poly[(i + 1) % poly.size()];
    const Vec2 c = poly[(i + 2) % poly.size()];
    if (distance(a, b) <= tol) return false;
    if (cross(b - a, c - b) < -tol) return false;
  }
  // A convex turn sequence can still wind twice; total turning must be 2*pi.
  double turning = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Vec2 d0 = poly[(i + 1) % poly.size()] - poly[i];
    const Vec2 d1 = poly[(i + 2) % poly.size()] - poly[(i + 1) % poly.size()];
    turning += std::atan2(cross(d0, d1), dot(d0, d1));
  }
  return std::abs(turning - 2.0 * M_PI) < 1e-6;
}

/// Boundary-inclusive containment for a convex counter-clockwise polygon.
inline bool contains(std::span<const Vec2> convex_ccw, Vec2 p, double tol = 1e-9) {
  for (std::size_t i = 0; i < convex_ccw.size(); ++i) {
    const Vec2 a = convex_ccw[i];
    const Vec2 b = convex_ccw[(i + 1) % convex_ccw.size()];
    const Vec2 e = b - a;
    const double len = norm(e);
    if (len <= 0.0) continue;
    if (cross(e, p - a) / len < -tol) return false;
  }
  return true;
}

/// Distance from `p` to the polygon's boundary.
inline double boundary_distance(std::span<const Vec2> poly, Vec2 p) {
  double d = std::numeric_limits<double>::infinity();
  for (const auto& e : edges(poly)) d = std::min(d, point_segment_distance(p, e));
  return d;
}

/// Distance from `p` to the (filled) convex polygon; zero inside.
inline double polygon_distance(std::span<const Vec2> convex_ccw, Vec2 p) {
  if (contains(convex_ccw, p, 0.0)) return 0.0;
  return boundary_distance(convex_ccw, p);
}

/// Signed clearance of `p` inside a convex polygon: positive inside.
inline double inner_clearance(std::span<const Vec2> convex_ccw, Vec2 p) {
  const double d = boundary_distance(convex_ccw, p);
  return contains(convex_ccw, p, 0.0) ? d : -d;
}

inline Vec2 centroid(std::span<const Vec2> poly) {
  const double a = signed_area(poly);
  if (std::abs(a) < 1e-15) {
    Vec2 c;
    for (auto v : poly) c += v;
    return poly.empty() ? c : c / static_cast<double>(poly.size());
  }
  Vec2 c;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Vec2 p = poly[i];
    const Vec2 q = poly[(i + 1) % poly.size()];
    c += (p + q) * cross(p, q);
  }
  return c / (6.0 * a);
}

/// Andrew's monotone chain; returns the hull counter-clockwise without
/// repeating the first point. Degenerate inputs collapse to 1 or 2 points.
inline std::vector<Vec2> convex_hull(std::vector<Vec2> pts) {
  std::sort(pts.begin(), pts.end(), [](Vec2 a, Vec2 b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return pts;
  std::vector<Vec2> hull(2 * pts.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    while (k >= 2 && cross(hull[k - 1] - hull[k - 2], pts[i] - hull[k - 2]) <= 0) --k;
    hull[k++] = pts[i];
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross(hull[k - 1] - hull[k - 2], pts[i] - hull[k - 2]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

/// Distance between the convex hull of `pts` and the segment `s`.
/// Returns the pair of closest points through `on_hull` / `on_segment` when
/// the sets are disjoint.
inline double hull_segment_distance(std::span<const Vec2> pts, const Segment& s, Vec2* on_hull = nullptr,
                                    Vec2* on_seg = nullptr);

/// Same as hull_segment_distance for points that already form a convex hull
/// in counter-clockwise order.
inline double convex_segment_distance(std::span<const Vec2> hull, const Segment& s, Vec2* on_hull = nullptr,
                                      Vec2* on_seg = nullptr) {
  double best = std::numeric_limits<double>::infinity();
  auto consider = [&](Vec2 p, Vec2 q) {
    const double d = distance(p, q);
    if (d < best) {
      best = d;
      if (on_hull) *on_hull = p;
      if (on_seg) *on_seg = q;
    }
  };
  if (hull.size() >= 3) {
    if (contains(hull, s.a, 0.0) || contains(hull, s.b, 0.0)) return 0.0;
    for (const auto& e : edges(hull)) {
      if (segments_intersect(e, s)) return 0.0;
    }
  } else if (hull.size() == 2) {
    if (segments_intersect({hull[0], hull[1]}, s)) return 0.0;
  }
  for (std::size_t i = 0; i < hull.size(); ++i) {
    const Segment e = hull.size() == 1 ? Segment{hull[0], hull[0]} : Segment{hull[i], hull[(i + 1) % hull.size()]};
    consider(closest_point(e, s.a), s.a);
    consider(closest_point(e, s.b), s.b);
    consider(e.a, closest_point(s, e.a));
    consider(e.b, closest_point(s, e.b));
  }
  return best;
}

inline double hull_segment_distance(std::span<const Vec2> pts, const Segment& s, Vec2* on_hull, Vec2* on_seg) {
  const std::vector<Vec2> hull = convex_hull({pts.begin(), pts.end()});
  return convex_segment_distance(hull, s, on_hull, on_seg);
}

/// Wraps an angle into (-pi, pi].
inline double wrap_angle(double a) {
  a = std::fmod(a + M_PI, 2.0 * M_PI);
  if (a <= 0.0) a += 2.0 * M_PI;
  return a - M_PI;
}

}  // namespace claimnav
