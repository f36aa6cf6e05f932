#pragma once
// Per-agent receding-horizon trajectory optimization for a unicycle.
//
// Decision variables are the N_t inputs plus one separating hyperplane
// (a, b) per wall element, shared by the whole horizon. The plane keeps every
// vertex of the wall on one side and every predicted position at least r on
// the other, which keeps the convex hull of the trajectory clear of the wall.
// States follow from the inputs by forward simulation (single shooting), so
// the dynamics hold by construction.
//
// The normal is parameterized by its angle, a = (cos t, sin t), which keeps
// |a| = 1. Gauss-Newton steps on a quadratic penalty first reach a feasible
// point, then a log barrier drives the cost down while staying feasible. The
// Hessian is assembled from the per-step Jacobians by a backward recursion.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <ctime>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "claimnav/claim_policy.hpp"
#include "claimnav/geometry.hpp"
#include "claimnav/semantic_map.hpp"

namespace claimnav {

struct AgentState {
  Vec2 position;
  double heading = 0.0;  // radians, (-pi, pi]
  double speed = 0.0;    // longitudinal, m/s
};

struct ControlInput {
  double accel = 0.0;     // m/s^2
  double yaw_rate = 0.0;  // rad/s
};

struct MPCConfig {
  int N_t = 20;
  double dt = 0.2;
  double v_min = 0.0, v_max = 0.5;
  double a_min = -0.5, a_max = 0.5;
  double omega_min = -0.5, omega_max = 0.5;
  double r_v = 0.15;
  double r_soft = 0.19;
  bool soft_radius_in_walls = true;  // wall constraints use r_soft, else r_v
  int N_h = 4;
  double f = 5.0;
  double max_cpu_time = 0.15;  // s per solve

  double w_pos = 1.0;
  double w_term = 5.0;
  double w_accel = 0.05;
  double w_yaw = 0.05;
  double w_speed = 20.0;
  double w_head = 0.5;
  double head_softening = 0.1;  // m

  bool rk4 = false;
  int max_inner = 6;           // Newton steps per barrier level
  int max_penalty_rounds = 4;  // feasibility rounds before giving up
  int max_evaluations = 60;    // merit evaluations per solve
  double penalty_init = 1e4;
  double barrier_init = 1e-2;
  double barrier_warm = 1e-4;  // starting level when warm-started
  double barrier_min = 1e-6;
  double barrier_decrease = 0.1;
  bool terminal_rest = true;  // plans end at rest
  double rest_tol = 1e-2;     // terminal speed allowance, m/s
  double feasibility_tol = 1e-6;
  double optimality_tol = 1e-3;  // predicted merit decrease that ends a barrier level
  double infeasible_tol = 1e-3;
  double radius_margin = 1e-3;  // solved against radius + margin
  double target_depth = 0.4;    // how far past an active interface to aim
  double approach_depth = 0.6;  // how far before a narrow interface to line up

  double wall_radius() const { return soft_radius_in_walls ? r_soft : r_v; }
  double horizon_reach() const { return v_max * N_t * dt; }

  /// Throws std::invalid_argument naming the first bad field.
  void validate() const {
    auto bad = [](const std::string& what) { throw std::invalid_argument("invalid MPC config: " + what); };
    if (N_t < 1) bad("N_t must be >= 1");
    if (!(dt > 0)) bad("dt must be > 0");
    if (!(v_min < v_max)) bad("v_min >= v_max");
    if (!(a_min <= a_max)) bad("a_min > a_max");
    if (!(omega_min <= omega_max)) bad("omega_min > omega_max");
    if (!(r_v > 0)) bad("r_v must be > 0");
    if (!(r_soft >= r_v)) bad("r_soft must be >= r_v");
    if (N_h < 0) bad("N_h must be >= 0");
    if (!(f > 0)) bad("f must be > 0");
    if (!(max_cpu_time > 0)) bad("max_cpu_time must be > 0");
    if (w_pos < 0 || w_term < 0 || w_accel < 0 || w_yaw < 0 || w_speed < 0 || w_head < 0) bad("weights must be >= 0");
    if (!(head_softening > 0)) bad("head_softening must be > 0");
    if (!(target_depth > 0) || !(approach_depth > 0)) bad("target_depth and approach_depth must be > 0");
    if (!(rest_tol > 0 && rest_tol < v_max - v_min)) bad("rest_tol");
    if (max_inner < 1 || max_penalty_rounds < 1 || max_evaluations < 1) bad("iteration caps must be >= 1");
    if (!(barrier_min > 0) || !(barrier_init >= barrier_min) || !(barrier_warm > 0) ||
        !(barrier_decrease > 0 && barrier_decrease < 1))
      bad("barrier schedule");
  }
};

struct Hyperplane {
  Vec2 normal;
  double offset = 0.0;
};

enum class SolveStatus { kOptimal, kMaxIterFeasible, kInfeasible };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::kOptimal: return "optimal";
    case SolveStatus::kMaxIterFeasible: return "max_iter_feasible";
    case SolveStatus::kInfeasible: return "infeasible";
  }
  return "?";
}

struct NavigationProblem {
  AgentState x_init;
  std::vector<WallElement> walls;
  std::vector<std::size_t> schedule;  // route index per step, N_t + 1 entries
  std::vector<AreaId> schedule_areas;
  std::vector<Vec2> targets;         // per step
  std::vector<double> speed_limits;  // per step
  MPCConfig config;
};

struct Solution {
  std::vector<AgentState> states;     // N_t + 1
  std::vector<ControlInput> inputs;   // N_t, as applied (see solve)
  std::vector<Hyperplane> planes;     // one per problem wall
  SolveStatus status = SolveStatus::kInfeasible;
  double solve_time = 0.0;  // s
  double cost = 0.0;
  double max_violation = 0.0;
  int iterations = 0;
};

// ---------------------------------------------------------------- dynamics

/// Forward-Euler unicycle step (or classic RK4 when `rk4`). Speed is not
/// projected here; see project_speed.
inline AgentState dynamics_step(const AgentState& x, const ControlInput& u, double dt, bool rk4 = false) {
  if (!rk4) {
    return {{x.position.x + dt * x.speed * std::cos(x.heading), x.position.y + dt * x.speed * std::sin(x.heading)},
            wrap_angle(x.heading + dt * u.yaw_rate),
            x.speed + dt * u.accel};
  }
  auto deriv = [&](double th, double v) { return std::array<double, 4>{v * std::cos(th), v * std::sin(th), u.yaw_rate, u.accel}; };
  const auto k1 = deriv(x.heading, x.speed);
  const auto k2 = deriv(x.heading + 0.5 * dt * k1[2], x.speed + 0.5 * dt * k1[3]);
  const auto k3 = deriv(x.heading + 0.5 * dt * k2[2], x.speed + 0.5 * dt * k2[3]);
  const auto k4 = deriv(x.heading + dt * k3[2], x.speed + dt * k3[3]);
  auto comb = [&](int i) { return dt / 6.0 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]); };
  return {{x.position.x + comb(0), x.position.y + comb(1)}, wrap_angle(x.heading + comb(2)), x.speed + comb(3)};
}

inline double project_speed(double v, const MPCConfig& c) { return std::clamp(v, c.v_min, c.v_max); }

using Matrix4 = Eigen::Matrix4d;
using Matrix42 = Eigen::Matrix<double, 4, 2>;

/// Jacobians of dynamics_step with respect to (px, py, heading, speed) and
/// (accel, yaw_rate).
inline void dynamics_jacobian(const AgentState& x, const ControlInput& u, double dt, bool rk4, Matrix4& A, Matrix42& B) {
  if (!rk4) {
    const double c = std::cos(x.heading);
    const double s = std::sin(x.heading);
    A.setIdentity();
    A(0, 2) = -dt * x.speed * s;
    A(0, 3) = dt * c;
    A(1, 2) = dt * x.speed * c;
    A(1, 3) = dt * s;
    B.setZero();
    B(2, 1) = dt;
    B(3, 0) = dt;
    return;
  }
  // Central differences on the RK4 map; heading wrap is undone.
  auto vec = [](const AgentState& s) { return Eigen::Vector4d(s.position.x, s.position.y, s.heading, s.speed); };
  auto diff = [&](const AgentState& p, const AgentState& m, double h) {
    Eigen::Vector4d d = (vec(p) - vec(m));
    d(2) = wrap_angle(d(2));
    return Eigen::Vector4d(d / (2 * h));
  };
  const double h = 1e-6;
  for (int i = 0; i < 4; ++i) {
    AgentState p = x, m = x;
    double* fp[4] = {&p.position.x, &p.position.y, &p.heading, &p.speed};
    double* fm[4] = {&m.position.x, &m.position.y, &m.heading, &m.speed};
    *fp[i] += h;
    *fm[i] -= h;
    A.col(i) = diff(dynamics_step(p, u, dt, true), dynamics_step(m, u, dt, true), h);
  }
  for (int i = 0; i < 2; ++i) {
    ControlInput p = u, m = u;
    (i == 0 ? p.accel : p.yaw_rate) += h;
    (i == 0 ? m.accel : m.yaw_rate) -= h;
    B.col(i) = diff(dynamics_step(x, p, dt, true), dynamics_step(x, m, dt, true), h);
  }
}

// ------------------------------------------------------------------- costs

using Vector6 = Eigen::Matrix<double, 6, 1>;

/// l(x, u) = w_pos |p - target|^2 + w_accel a^2 + w_yaw w^2
///           + w_speed max(0, v - speed_limit)^2
///           + w_head |d| (|d| - h.d) / sqrt(|d|^2 + s^2),
/// with d = target - p and h the heading vector. The last term vanishes when
/// facing the target or standing on it; without it a target behind an agent
/// at rest is a stationary point whenever turning around takes longer than
/// the horizon.
/// Gradient order: px, py, heading, speed, accel, yaw_rate.
namespace detail {

/// |d| (|d| - h.d) / sqrt(|d|^2 + s^2) with d = target - p. Gradient and a
/// positive semidefinite curvature over (px, py, heading).
inline double facing_cost(Vec2 p, double heading, Vec2 target, double soft, Eigen::Vector3d* grad = nullptr,
                          Eigen::Matrix3d* hess = nullptr) {
  const Vec2 d = target - p;
  const double D = norm(d);
  if (grad) grad->setZero();
  if (hess) hess->setZero();
  if (D < 1e-12) return 0.0;
  const Vec2 h{std::cos(heading), std::sin(heading)};
  const Vec2 hp = perp(h);
  const double s = dot(h, d);
  const double t = dot(hp, d);
  const double sn = std::sqrt(D * D + soft * soft);
  const double num = D * (D - s);
  if (!grad && !hess) return num / sn;
  const Eigen::Vector2d dv(d.x, d.y), hv(h.x, h.y), hpv(hp.x, hp.y);
  // Derivatives over d, then mapped to p = target - d.
  const Eigen::Vector2d gnum = 2.0 * dv - D * hv - (s / D) * dv;
  const Eigen::Vector2d gd = gnum / sn - num * dv / (sn * sn * sn);
  const double gth = -D * t / sn;
  if (grad) *grad << -gd(0), -gd(1), gth;
  if (hess) {
    const Eigen::Matrix2d I = Eigen::Matrix2d::Identity();
    const Eigen::Matrix2d hnum = 2.0 * I - (hv * dv.transpose() + dv * hv.transpose()) / D -
                                 s * (I / D - dv * dv.transpose() / (D * D * D));
    const double sn3 = sn * sn * sn;
    const Eigen::Vector2d ginv = -dv / sn3;
    const Eigen::Matrix2d hinv = -I / sn3 + 3.0 * dv * dv.transpose() / (sn3 * sn * sn);
    const Eigen::Matrix2d hdd = hnum / sn + gnum * ginv.transpose() + ginv * gnum.transpose() + num * hinv;
    const Eigen::Vector2d hdt = -(t * dv / D + D * hpv) / sn + D * t * dv / sn3;
    Eigen::Matrix3d H;
    H.topLeftCorner<2, 2>() = hdd;
    H.block<2, 1>(0, 2) = -hdt;
    H.block<1, 2>(2, 0) = -hdt.transpose();
    H(2, 2) = D * s / sn;
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(H);
    *hess = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).asDiagonal() * es.eigenvectors().transpose();
  }
  return num / sn;
}

}  // namespace detail

inline double stage_cost(const AgentState& x, const ControlInput& u, Vec2 target, double speed_limit,
                         const MPCConfig& c, Vector6* grad = nullptr) {
  const Vec2 e = x.position - target;
  const double over = std::max(0.0, x.speed - speed_limit);
  Eigen::Vector3d gf;
  const double face = detail::facing_cost(x.position, x.heading, target, c.head_softening, grad ? &gf : nullptr);
  if (grad) {
    *grad << 2 * c.w_pos * e.x + c.w_head * gf(0), 2 * c.w_pos * e.y + c.w_head * gf(1), c.w_head * gf(2),
        2 * c.w_speed * over, 2 * c.w_accel * u.accel, 2 * c.w_yaw * u.yaw_rate;
  }
  return c.w_pos * dot(e, e) + c.w_accel * u.accel * u.accel + c.w_yaw * u.yaw_rate * u.yaw_rate +
         c.w_speed * over * over + c.w_head * face;
}

/// n(x) = w_term |p - target|^2. Gradient over the state.
inline double terminal_cost(const AgentState& x, Vec2 target, const MPCConfig& c, Eigen::Vector4d* grad = nullptr) {
  const Vec2 e = x.position - target;
  if (grad) *grad << 2 * c.w_term * e.x, 2 * c.w_term * e.y, 0.0, 0.0;
  return c.w_term * dot(e, e);
}

// ------------------------------------------------------------ hyperplanes

/// a.v - b: nonnegative when wall vertex v is on the wall side.
/// Gradient order: a_x, a_y, b.
inline double vertex_residual(Vec2 a, double b, Vec2 v, Eigen::Vector3d* grad = nullptr) {
  if (grad) *grad << v.x, v.y, -1.0;
  return dot(a, v) - b;
}

/// b - a.p - r: nonnegative when position p keeps distance r from the plane
/// on the free side. Gradient order: a_x, a_y, b, p_x, p_y.
inline double agent_residual(Vec2 a, double b, Vec2 p, double r, Eigen::Matrix<double, 5, 1>* grad = nullptr) {
  if (grad) *grad << -p.x, -p.y, 1.0, -a.x, -a.y;
  return b - dot(a, p) - r;
}

/// 1 - |a|: nonnegative when the normal is at most unit length.
inline double norm_residual(Vec2 a, Eigen::Vector2d* grad = nullptr) {
  const double n = norm(a);
  if (grad) {
    if (n > 0) {
      *grad << -a.x / n, -a.y / n;
    } else {
      grad->setZero();
    }
  }
  return 1.0 - n;
}

struct HyperplaneResiduals {
  std::vector<double> vertex;  // per wall, per vertex
  std::vector<double> agent;   // per wall, per trajectory point
  std::vector<double> norm;    // per wall

  double min() const {
    double m = std::numeric_limits<double>::infinity();
    for (const auto* v : {&vertex, &agent, &norm}) {
      for (double x : *v) m = std::min(m, x);
    }
    return m;
  }
  bool satisfied(double tol) const { return min() >= -tol; }
};

/// All separating-hyperplane residuals; every value is >= 0 exactly when the
/// constraints hold.
inline HyperplaneResiduals hyperplane_residuals(const std::vector<Vec2>& positions, const std::vector<WallElement>& walls,
                                                const std::vector<Hyperplane>& planes, double r) {
  if (walls.size() != planes.size()) throw std::invalid_argument("one hyperplane per wall element required");
  HyperplaneResiduals out;
  for (std::size_t w = 0; w < walls.size(); ++w) {
    const Hyperplane& h = planes[w];
    for (Vec2 v : walls[w].vertices) out.vertex.push_back(vertex_residual(h.normal, h.offset, v));
    for (Vec2 p : positions) out.agent.push_back(agent_residual(h.normal, h.offset, p, r));
    out.norm.push_back(norm_residual(h.normal));
  }
  return out;
}

inline std::vector<Vec2> positions_of(const std::vector<AgentState>& xs) {
  std::vector<Vec2> out;
  out.reserve(xs.size());
  for (const auto& x : xs) out.push_back(x.position);
  return out;
}

namespace detail {

inline Segment wall_segment(const WallElement& w) { return {w.vertices.front(), w.vertices.back()}; }

/// Distance between a convex hull (counter-clockwise) and a wall element.
inline double hull_wall_distance(const std::vector<Vec2>& hull, const WallElement& w, Vec2* on_hull = nullptr,
                                 Vec2* on_wall = nullptr) {
  if (w.vertices.size() == 2) return convex_segment_distance(hull, wall_segment(w), on_hull, on_wall);
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < w.vertices.size(); ++i) {
    Vec2 h, s;
    const double d = convex_segment_distance(hull, {w.vertices[i], w.vertices[i + 1]}, &h, &s);
    if (d < best) {
      best = d;
      if (on_hull) *on_hull = h;
      if (on_wall) *on_wall = s;
    }
  }
  return best;
}

/// True when the hull lies closer than `limit` to the wall element; a box
/// test settles most far walls without the exact distance.
inline bool hull_near_wall(const std::vector<Vec2>& hull, const WallElement& w, double limit) {
  double lo_x = std::numeric_limits<double>::infinity(), lo_y = lo_x, hi_x = -lo_x, hi_y = -lo_x;
  for (Vec2 p : hull) {
    lo_x = std::min(lo_x, p.x);
    hi_x = std::max(hi_x, p.x);
    lo_y = std::min(lo_y, p.y);
    hi_y = std::max(hi_y, p.y);
  }
  double wlo_x = std::numeric_limits<double>::infinity(), wlo_y = wlo_x, whi_x = -wlo_x, whi_y = -wlo_x;
  for (Vec2 v : w.vertices) {
    wlo_x = std::min(wlo_x, v.x);
    whi_x = std::max(whi_x, v.x);
    wlo_y = std::min(wlo_y, v.y);
    whi_y = std::max(whi_y, v.y);
  }
  const double gx = std::max({0.0, wlo_x - hi_x, lo_x - whi_x});
  const double gy = std::max({0.0, wlo_y - hi_y, lo_y - whi_y});
  if (gx >= limit || gy >= limit || gx * gx + gy * gy >= limit * limit) return false;
  return hull_wall_distance(hull, w) < limit;
}

/// Distance between the hull of the points and a wall element.
inline double wall_distance(const std::vector<Vec2>& pts, const WallElement& w, Vec2* on_hull = nullptr,
                            Vec2* on_wall = nullptr) {
  return hull_wall_distance(convex_hull(pts), w, on_hull, on_wall);
}

/// Best separating plane for the given points, as an angle and offset with
/// the plane touching the wall. Returns the achieved margin
/// min_v(a.v) - max_p(a.p).
inline double best_plane(const std::vector<Vec2>& pts, const WallElement& w, double& theta, double& b) {
  Vec2 ph, pw;
  const double d = wall_distance(pts, w, &ph, &pw);
  auto margin_for = [&](double t, double& off) {
    const Vec2 a{std::cos(t), std::sin(t)};
    double lo = std::numeric_limits<double>::infinity();
    for (Vec2 v : w.vertices) lo = std::min(lo, dot(a, v));
    double hi = -std::numeric_limits<double>::infinity();
    for (Vec2 p : pts) hi = std::max(hi, dot(a, p));
    off = lo;
    return lo - hi;
  };
  if (d > 1e-12) {
    const Vec2 a = (pw - ph) * (1.0 / d);
    theta = std::atan2(a.y, a.x);
    return margin_for(theta, b);
  }
  // Overlapping: scan directions for the least-bad plane.
  double best = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < 72; ++i) {
    const double t = -M_PI + i * (2 * M_PI / 72);
    double off = 0.0;
    const double m = margin_for(t, off);
    if (m > best) {
      best = m;
      theta = t;
      b = off;
    }
  }
  return best;
}

inline double thread_cpu_seconds() {
  timespec ts{};
  clock_gettime(CLOCK_THREAD_CPUTIME_ID, &ts);
  return static_cast<double>(ts.tv_sec) + 1e-9 * static_cast<double>(ts.tv_nsec);
}

/// Single-shooting transcription of one NavigationProblem.
///
/// Phase one drives an infeasible start into the interior with a quadratic
/// penalty; phase two follows a log-barrier path from there, so every
/// accepted iterate of phase two is strictly feasible. Both phases take
/// damped Gauss-Newton steps on the inputs and plane parameters together.
class ShootingSolver {
 public:
  enum class Mode { kPenalty, kBarrier };

  explicit ShootingSolver(const NavigationProblem& p)
      : p_(p), c_(p.config), N_(c_.N_t), nu_(2 * N_), r_eff_(c_.wall_radius() + c_.radius_margin) {}

  Solution solve(const Solution* warm) {
    const auto t0 = std::chrono::steady_clock::now();
    cpu0_ = thread_cpu_seconds();
    evals_ = 0;
    init_walls();
    std::vector<double> shifted;
    std::vector<double> u = initial_inputs(warm, shifted);
    activate_near(u, kActivation);
    std::vector<double> z = pack(u);
    polish_planes(z);

    bool converged = false;
    bool feasible = false;
    double mu = c_.barrier_init;
    if (!shifted.empty()) mu = std::max(c_.barrier_min, std::min(mu, c_.barrier_warm));
    for (int round = 0; round < 3; ++round) {
      feasible = std::isfinite(assemble(z, Mode::kBarrier, 1.0, false)) || drive_feasible(z);
      if (!feasible) break;
      converged = follow_barrier(z, mu);
      // Walls left out at the start may have come into range.
      const std::vector<double> uz(z.begin(), z.begin() + nu_);
      const auto before = active_;
      activate_near(uz, 0.05);
      if (before == active_) break;
      z = pack(uz);
      polish_planes(z);
      converged = false;
    }

    Solution out = extract(z);
    if (!shifted.empty()) {
      // The shifted plan is a valid answer too; keep the cheaper one.
      Solution alt = extract(pack_all(shifted));
      if (alt.max_violation <= c_.feasibility_tol && alt.states.back().speed <= c_.v_min + c_.rest_tol &&
          (out.max_violation > c_.feasibility_tol || alt.cost < out.cost)) {
        out = std::move(alt);
      }
    }
    if (out.max_violation > c_.infeasible_tol) {
      out.status = SolveStatus::kInfeasible;
    } else if (feasible && converged && out.max_violation <= c_.feasibility_tol) {
      out.status = SolveStatus::kOptimal;
    } else {
      out.status = SolveStatus::kMaxIterFeasible;
    }
    out.iterations = evals_;
    out.solve_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
  }

  // Test hooks: every wall active, planes centered in the free gap.
  void setup_for_test(const std::vector<double>& u) {
    init_walls();
    std::fill(active_.begin(), active_.end(), true);
    rebuild_layout();
    auto z = pack(u);
    polish_planes(z);
    unpack_planes(z);
  }
  std::vector<double> pack_for_test(const std::vector<double>& u) const { return pack(u); }
  const Eigen::MatrixXd& hessian() const { return H_; }
  double value_and_gradient(const std::vector<double>& z, Mode m, double param, std::vector<double>* grad) {
    const double v = assemble(z, m, param, grad != nullptr);
    if (grad) grad->assign(grad_.data(), grad_.data() + grad_.size());
    return v;
  }

 private:
  static constexpr double kActivation = 0.5;
  static constexpr double kPenaltyShift = 2e-3;
  static constexpr double kLateMargin = 0.02;

  bool out_of_budget() const {
    return evals_ >= c_.max_evaluations || thread_cpu_seconds() - cpu0_ > c_.max_cpu_time;
  }

  void init_walls() {
    const std::size_t W = p_.walls.size();
    theta_.assign(W, 0.0);
    off_.assign(W, 0.0);
    pending_.clear();
    active_.assign(W, false);
    // The start point is fixed: near a wall it only has to keep the distance
    // it already has.
    r0_.assign(W, r_eff_);
    for (std::size_t w = 0; w < W; ++w) {
      const double d0 = wall_distance({p_.x_init.position}, p_.walls[w]);
      r0_[w] = std::min(r_eff_, std::max(0.0, d0 - 1e-4));
    }
    rebuild_layout();
  }

  std::vector<double> initial_inputs(const Solution* warm, std::vector<double>& shifted) {
    if (warm && warm->inputs.size() == static_cast<std::size_t>(N_)) {
      for (int k = 1; k < N_; ++k) {
        shifted.push_back(warm->inputs[k].accel);
        shifted.push_back(warm->inputs[k].yaw_rate);
      }
      shifted.push_back(0.0);
      shifted.push_back(0.0);
      project_inputs(shifted);
    }
    // The pursuit guess gets the agent out of stationary points such as
    // facing away from the target at rest; the braking guesses are feasible
    // whenever stopping straight ahead is.
    std::vector<std::vector<double>> cands{pursuit_inputs(), braking_inputs(false), braking_inputs(true)};
    if (!shifted.empty()) cands.insert(cands.begin(), shifted);
    std::size_t best = 0;
    double best_m = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < cands.size(); ++i) {
      const double m = quick_merit(cands[i]);
      if (m < best_m) {
        best_m = m;
        best = i;
      }
    }
    return cands[best];
  }

  std::vector<double> braking_inputs(bool turn) const {
    std::vector<double> u;
    AgentState x = p_.x_init;
    for (int k = 0; k < N_; ++k) {
      const double acc = std::clamp((speed_floor() - x.speed) / c_.dt, c_.a_min, c_.a_max);
      double omega = 0.0;
      if (turn) {
        const Vec2 d = p_.targets[std::min<std::size_t>(k + 1, p_.targets.size() - 1)] - x.position;
        if (norm(d) > 1e-6) omega = std::clamp(wrap_angle(std::atan2(d.y, d.x) - x.heading) / c_.dt, c_.omega_min, c_.omega_max);
      }
      u.push_back(acc);
      u.push_back(omega);
      x = dynamics_step(x, {acc, omega}, c_.dt, c_.rk4);
      x.speed = project_speed(x.speed, c_);
    }
    return u;
  }

  double quick_merit(const std::vector<double>& u) {
    rollout(u, false);
    double cost = objective(u);
    const auto hull = convex_hull(positions());
    for (const auto& w : p_.walls) {
      if (!hull_near_wall(hull, w, r_eff_)) continue;
      const double d = hull_wall_distance(hull, w);
      if (d < r_eff_) cost += 1e6 * (1.0 + r_eff_ - d);
    }
    return cost;
  }

  /// Turn towards each step's target and drive, braking to rest by the end.
  std::vector<double> pursuit_inputs() const {
    std::vector<double> u;
    AgentState x = p_.x_init;
    for (int k = 0; k < N_; ++k) {
      const Vec2 t = p_.targets[std::min<std::size_t>(k + 1, p_.targets.size() - 1)];
      const Vec2 d = t - x.position;
      const double dist = norm(d);
      const double err = dist > 1e-6 ? wrap_angle(std::atan2(d.y, d.x) - x.heading) : 0.0;
      const double omega = std::clamp(err / c_.dt, c_.omega_min, c_.omega_max);
      const double steps_left = N_ - k - 1;
      double v_des = std::min({c_.v_max, 0.8 * dist, -c_.a_min * c_.dt * steps_left});
      v_des = std::min(v_des, p_.speed_limits[std::min<std::size_t>(k, p_.speed_limits.size() - 1)]);
      if (std::abs(err) > M_PI / 3) v_des = 0.0;
      v_des *= std::max(0.0, std::cos(err));
      v_des = std::clamp(v_des, speed_floor(), c_.v_max - 0.5 * c_.rest_tol);
      const double acc = std::clamp((v_des - x.speed) / c_.dt, c_.a_min, c_.a_max);
      u.push_back(acc);
      u.push_back(omega);
      x = dynamics_step(x, {acc, omega}, c_.dt, c_.rk4);
      x.speed = project_speed(x.speed, c_);
    }
    return u;
  }

  // Guesses keep speeds strictly inside the bounds so the barrier is finite.
  double speed_floor() const { return c_.v_min + 0.1 * c_.rest_tol; }

  void project_inputs(std::vector<double>& u) const {
    for (int k = 0; k < N_; ++k) {
      u[2 * k] = std::clamp(u[2 * k], c_.a_min, c_.a_max);
      u[2 * k + 1] = std::clamp(u[2 * k + 1], c_.omega_min, c_.omega_max);
    }
  }

  /// Activates walls whose distance to the trajectory hull of `u` is below
  /// r_eff + margin.
  void activate_near(const std::vector<double>& u, double margin) {
    rollout(u, false);
    const auto hull = convex_hull(positions());
    bool changed = false;
    for (std::size_t w = 0; w < p_.walls.size(); ++w) {
      if (active_[w] || !hull_near_wall(hull, p_.walls[w], r_eff_ + margin)) continue;
      active_[w] = true;
      changed = true;
    }
    if (changed) rebuild_layout();
  }

  void rebuild_layout() {
    slot_.assign(p_.walls.size(), -1);
    n_active_ = 0;
    for (std::size_t w = 0; w < p_.walls.size(); ++w) {
      if (active_[w]) slot_[w] = n_active_++;
    }
  }

  int n_vars() const { return nu_ + 2 * n_active_; }

  std::vector<double> pack(const std::vector<double>& u) const {
    std::vector<double> z(u.begin(), u.begin() + nu_);
    z.resize(n_vars());
    for (std::size_t w = 0; w < p_.walls.size(); ++w) {
      if (slot_[w] < 0) continue;
      z[nu_ + 2 * slot_[w]] = theta_[w];
      z[nu_ + 2 * slot_[w] + 1] = off_[w];
    }
    return z;
  }

  std::vector<double> pack_all(const std::vector<double>& u) { return pack(u); }

  void unpack_planes(const std::vector<double>& z) {
    for (std::size_t w = 0; w < p_.walls.size(); ++w) {
      if (slot_[w] < 0) continue;
      theta_[w] = z[nu_ + 2 * slot_[w]];
      off_[w] = z[nu_ + 2 * slot_[w] + 1];
    }
  }

  /// Best separating plane per active wall, placed in the middle of the gap
  /// left after the radius so both sides have slack.
  void polish_planes(std::vector<double>& z) {
    rollout({z.begin(), z.begin() + nu_}, false);
    const auto pts = positions();
    for (std::size_t w = 0; w < p_.walls.size(); ++w) {
      if (slot_[w] < 0) continue;
      double t = 0.0, b = 0.0;
      const double m = best_plane(pts, p_.walls[w], t, b);
      const double slack = m - r_eff_;
      if (slack > 0) b -= 0.5 * slack;
      z[nu_ + 2 * slot_[w]] = t;
      z[nu_ + 2 * slot_[w] + 1] = b;
    }
  }

  void rollout(const std::vector<double>& u, bool sens) {
    xs_.resize(N_ + 1);
    xs_[0] = p_.x_init;
    clamped_.assign(N_, false);
    if (sens) {
      A_.resize(N_);
      B_.resize(N_);
    }
    for (int k = 0; k < N_; ++k) {
      const ControlInput in{u[2 * k], u[2 * k + 1]};
      AgentState nx = dynamics_step(xs_[k], in, c_.dt, c_.rk4);
      const double v = project_speed(nx.speed, c_);
      clamped_[k] = v != nx.speed;
      nx.speed = v;
      // Heading stays continuous inside the horizon.
      nx.heading = xs_[k].heading + wrap_angle(nx.heading - xs_[k].heading);
      if (sens) {
        Matrix4 A;
        Matrix42 B;
        dynamics_jacobian(xs_[k], in, c_.dt, c_.rk4, A, B);
        if (clamped_[k]) {
          A.row(3).setZero();
          B.row(3).setZero();
        }
        A_[k] = A;
        B_[k] = B;
      }
      xs_[k + 1] = nx;
    }
  }

  std::vector<Vec2> positions() const {
    std::vector<Vec2> out;
    out.reserve(xs_.size());
    for (const auto& x : xs_) out.push_back(x.position);
    return out;
  }

  double objective(const std::vector<double>& u) const {
    double J = 0.0;
    for (int k = 0; k < N_; ++k) {
      J += stage_cost(xs_[k], {u[2 * k], u[2 * k + 1]}, p_.targets[k], p_.speed_limits[k], c_);
    }
    return J + terminal_cost(xs_[N_], p_.targets[N_], c_);
  }

  /// Contribution of one constraint value g (<= 0 wanted) to the merit:
  /// value, slope c = d(merit)/dg and Gauss-Newton curvature h.
  bool term(Mode mode, double param, double g, double& value, double& c, double& h) const {
    if (mode == Mode::kBarrier) {
      if (g >= 0) return false;
      value += -param * std::log(-g);
      c = param / -g;
      h = param / (g * g);
    } else {
      const double s = g + kPenaltyShift;
      if (s > 0) {
        value += 0.5 * param * s * s;
        c = param * s;
        h = param;
      } else {
        c = h = 0.0;
      }
    }
    return true;
  }

  /// Merit at z; with `derivs` also its gradient and Gauss-Newton Hessian.
  /// Returns +inf when a barrier term is undefined.
  double assemble(const std::vector<double>& z, Mode mode, double param, bool derivs) {
    const std::vector<double> u(z.begin(), z.begin() + nu_);
    unpack_planes(z);
    rollout(u, derivs);
    const int n = n_vars();
    if (derivs) {
      grad_.setZero(n);
      H_.setZero(n, n);
    }
    double value = objective(u);
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<Vec2> a(p_.walls.size()), da(p_.walls.size());
    for (std::size_t w = 0; w < p_.walls.size(); ++w) {
      a[w] = {std::cos(theta_[w]), std::sin(theta_[w])};
      da[w] = {-a[w].y, a[w].x};
    }
    // Vertex constraints touch plane variables only.
    for (std::size_t w = 0; w < p_.walls.size(); ++w) {
      if (slot_[w] < 0) continue;
      const int col = nu_ + 2 * slot_[w];
      for (Vec2 v : p_.walls[w].vertices) {
        double c = 0, h = 0;
        if (!term(mode, param, off_[w] - dot(a[w], v), value, c, h)) return inf;
        if (!derivs) continue;
        const double gt = -dot(da[w], v);
        grad_(col) += c * gt;
        grad_(col + 1) += c;
        H_(col, col) += h * gt * gt + c * dot(a[w], v);
        H_(col, col + 1) += h * gt;
        H_(col + 1, col) += h * gt;
        H_(col + 1, col + 1) += h;
      }
    }
    if (derivs) {
      qpos_.assign(N_ + 1, Vec2{});
      Mk_.assign(N_ + 1, Eigen::Matrix4d::Zero());
      qall_.setZero(4 * (N_ + 1));
      R_.setZero(4 * (N_ + 1), 2 * n_active_);
    }
    Eigen::Matrix4d M;
    Eigen::Vector4d q;
    for (int k = 0; k <= N_; ++k) {
      M.setZero();
      q.setZero();
      const AgentState& x = xs_[k];
      if (k > 0 && derivs) {
        const double wp = k < N_ ? c_.w_pos : c_.w_term;
        const Vec2 e = x.position - p_.targets[k];
        q(0) += 2 * wp * e.x;
        q(1) += 2 * wp * e.y;
        M(0, 0) += 2 * wp;
        M(1, 1) += 2 * wp;
        if (k < N_) {
          const double over = x.speed - p_.speed_limits[k];
          if (over > 0) {
            q(3) += 2 * c_.w_speed * over;
            M(3, 3) += 2 * c_.w_speed;
          }
          Eigen::Vector3d gf;
          Eigen::Matrix3d hf;
          detail::facing_cost(x.position, x.heading, p_.targets[k], c_.head_softening, &gf, &hf);
          q.head<3>() += c_.w_head * gf;
          M.topLeftCorner<3, 3>() += c_.w_head * hf;
        }
      }
      for (std::size_t w = 0; w < p_.walls.size(); ++w) {
        if (slot_[w] < 0) continue;
        const double r = k == 0 ? r0_[w] : r_eff_;
        if (k == 0 && r <= 0) continue;
        double c = 0, h = 0;
        if (!term(mode, param, dot(a[w], x.position) - off_[w] + r, value, c, h)) return inf;
        if (!derivs || (c == 0 && h == 0)) continue;
        const int col = nu_ + 2 * slot_[w];
        const double gt = dot(da[w], x.position);
        grad_(col) += c * gt;
        grad_(col + 1) -= c;
        H_(col, col) += h * gt * gt - c * dot(a[w], x.position);
        H_(col, col + 1) -= h * gt;
        H_(col + 1, col) -= h * gt;
        H_(col + 1, col + 1) += h;
        if (k == 0) continue;
        q(0) += c * a[w].x;
        q(1) += c * a[w].y;
        M(0, 0) += h * a[w].x * a[w].x;
        M(0, 1) += h * a[w].x * a[w].y;
        M(1, 0) += h * a[w].x * a[w].y;
        M(1, 1) += h * a[w].y * a[w].y;
        // Cross terms between the position and this plane, including the
        // curvature of a(theta).p.
        const int rc = 2 * slot_[w];
        R_(4 * k, rc) += h * gt * a[w].x + c * da[w].x;
        R_(4 * k + 1, rc) += h * gt * a[w].y + c * da[w].y;
        R_(4 * k, rc + 1) -= h * a[w].x;
        R_(4 * k + 1, rc + 1) -= h * a[w].y;
      }
      if (k > 0) {
        double c = 0, h = 0;
        if (!term(mode, param, c_.v_min - x.speed, value, c, h)) return inf;
        q(3) -= c;
        M(3, 3) += h;
        if (!term(mode, param, x.speed - c_.v_max, value, c, h)) return inf;
        q(3) += c;
        M(3, 3) += h;
      }
      if (k == N_ && c_.terminal_rest) {
        double c = 0, h = 0;
        if (!term(mode, param, x.speed - c_.v_min - c_.rest_tol, value, c, h)) return inf;
        q(3) += c;
        M(3, 3) += h;
      }
      if (derivs) {
        qpos_[k] = {q(0), q(1)};
        if (k > 0) {
          Mk_[k] = M;
          qall_.segment<4>(4 * k) = q;
        }
      }
    }
    if (derivs) {
      // Second-order terms of the positions through heading and speed,
      // contracted with the costate Q_j = sum over k > j of dmerit/dp_k.
      Vec2 Q{};
      for (int j = N_ - 1; j >= 1; --j) {
        Q += qpos_[j + 1];
        const Vec2 h{std::cos(xs_[j].heading), std::sin(xs_[j].heading)};
        Mk_[j](2, 2) += -c_.dt * xs_[j].speed * dot(h, Q);
        const double ctv = c_.dt * dot(perp(h), Q);
        Mk_[j](2, 3) += ctv;
        Mk_[j](3, 2) += ctv;
      }
      // Backward sweep: P_k = W_k + A_k' P_{k+1} A_k collects the state
      // curvature of all later stages, lambda and Lam do the same for the
      // state gradient and the plane cross terms.
      const int np = 2 * n_active_;
      Matrix4 P = Mk_[N_];
      Eigen::Vector4d lambda = qall_.segment<4>(4 * N_);
      Eigen::MatrixXd Lam = R_.middleRows(4 * N_, 4);
      Eigen::MatrixXd Lam_next(4, np);
      Matrix42 Y;
      for (int j = N_ - 1; j >= 0; --j) {
        const Matrix42& Bj = B_[j];
        grad_.segment<2>(2 * j).noalias() += Bj.transpose() * lambda;
        if (np > 0) H_.block(2 * j, nu_, 2, np).noalias() += Bj.transpose() * Lam;
        Y.noalias() = P * Bj;
        H_.block<2, 2>(2 * j, 2 * j).noalias() += Bj.transpose() * Y;
        for (int i = j - 1; i >= 0; --i) {
          Y = A_[i + 1].transpose() * Y;
          H_.block<2, 2>(2 * i, 2 * j).noalias() += B_[i].transpose() * Y;
        }
        if (j == 0) break;
        const Matrix4& Aj = A_[j];
        P = Mk_[j] + Aj.transpose() * P * Aj;
        lambda = qall_.segment<4>(4 * j) + Aj.transpose() * lambda;
        if (np > 0) {
          Lam_next.noalias() = Aj.transpose() * Lam;
          Lam = R_.middleRows(4 * j, 4) + Lam_next;
        }
      }
      for (int j = 0; j < N_; ++j) {
        for (int i = 0; i < j; ++i) H_.block<2, 2>(2 * j, 2 * i) = H_.block<2, 2>(2 * i, 2 * j).transpose();
      }
      if (np > 0) H_.bottomLeftCorner(np, nu_) = H_.topRightCorner(nu_, np).transpose();
      for (int k = 0; k < N_; ++k) {
        grad_(2 * k) += 2 * c_.w_accel * u[2 * k];
        grad_(2 * k + 1) += 2 * c_.w_yaw * u[2 * k + 1];
        H_(2 * k, 2 * k) += 2 * c_.w_accel;
        H_(2 * k + 1, 2 * k + 1) += 2 * c_.w_yaw;
      }
    }
    ++evals_;
    return value;
  }

  /// One damped Gauss-Newton step with a backtracking line search. Inputs
  /// resting on a bound and pushed outward are held. Returns false once no
  /// meaningful decrease is possible.
  bool newton_step(std::vector<double>& z, Mode mode, double param, double& value) {
    value = assemble(z, mode, param, true);
    const int n = n_vars();
    std::vector<bool> fixed(n, false);
    for (int k = 0; k < N_; ++k) {
      const double lo[2] = {c_.a_min, c_.omega_min};
      const double hi[2] = {c_.a_max, c_.omega_max};
      for (int j = 0; j < 2; ++j) {
        const int i = 2 * k + j;
        if ((z[i] <= lo[j] + 1e-12 && grad_(i) > 0) || (z[i] >= hi[j] - 1e-12 && grad_(i) < 0)) fixed[i] = true;
      }
      // Same for accelerations whose step ends on a speed bound.
      const double v = xs_[k + 1].speed;
      if ((v <= c_.v_min + 1e-12 && grad_(2 * k) > 0) || (v >= c_.v_max - 1e-12 && grad_(2 * k) < 0)) {
        fixed[2 * k] = true;
      }
    }
    Eigen::MatrixXd H = H_;
    Eigen::VectorXd g = grad_;
    for (int i = 0; i < n; ++i) {
      if (fixed[i]) {
        H.row(i).setZero();
        H.col(i).setZero();
        H(i, i) = 1.0;
        g(i) = 0.0;
      }
    }
    while (!out_of_budget()) {
      Eigen::MatrixXd Hd = H;
      for (int i = 0; i < n; ++i) Hd(i, i) += damping_ * (std::abs(H(i, i)) + 1e-3);
      Eigen::LLT<Eigen::MatrixXd> llt(Hd);
      if (llt.info() != Eigen::Success) {
        // Indefinite curvature: fall back towards gradient descent.
        damping_ = std::max(damping_ * 10.0, 1e-4);
        if (damping_ > 1e8) return false;
        continue;
      }
      const Eigen::VectorXd d = -llt.solve(g);
      const double dec = -g.dot(d);
      // Barrier levels stop once the predicted decrease is below mu or the
      // optimality tolerance.
      const double tol = mode == Mode::kBarrier ? std::max(param, c_.optimality_tol) : 0.0;
      if (!(dec > std::max(tol, 1e-10 * (1.0 + std::abs(value))))) return false;
      double alpha = mode == Mode::kBarrier ? std::min(1.0, boundary_fraction(d)) : 1.0;
      for (int ls = 0; ls < 6 && !out_of_budget(); ++ls, alpha *= 0.4) {
        std::vector<double> trial = z;
        for (int i = 0; i < n; ++i) trial[i] += alpha * d(i);
        project_inputs(trial);
        const double v = assemble(trial, mode, param, false);
        if (v < value - 1e-4 * alpha * dec) {
          if (hits_inactive()) return false;
          z = std::move(trial);
          damping_ = std::max(damping_ * 0.3, 1e-8);
          value = v;
          return true;
        }
      }
      damping_ *= 20.0;
      if (damping_ > 1e6) return false;
    }
    return false;
  }

  /// Records inactive walls the last rollout came close to.
  bool hits_inactive() {
    const auto hull = convex_hull(positions());
    for (std::size_t w = 0; w < p_.walls.size(); ++w) {
      if (!active_[w] && hull_near_wall(hull, p_.walls[w], r_eff_ + kLateMargin)) pending_.push_back(w);
    }
    return !pending_.empty();
  }

  /// Activates the pending walls around the current iterate.
  bool activate_pending(std::vector<double>& z) {
    if (pending_.empty()) return false;
    const std::vector<double> u(z.begin(), z.begin() + nu_);
    unpack_planes(z);
    for (std::size_t w : pending_) active_[w] = true;
    pending_.clear();
    rebuild_layout();
    z = pack(u);
    polish_planes(z);
    return true;
  }

  /// Largest step fraction keeping every linearized constraint at most 99 %
  /// of the way to its boundary. Uses the state of the last assemble().
  double boundary_fraction(const Eigen::VectorXd& d) const {
    double alpha = 1.0;
    auto limit = [&](double g, double dg) {
      if (dg > 0 && g < 0) alpha = std::min(alpha, -0.99 * g / dg);
    };
    std::vector<Eigen::Vector4d> dx(N_ + 1, Eigen::Vector4d::Zero());
    for (int k = 0; k < N_; ++k) dx[k + 1] = A_[k] * dx[k] + B_[k] * d.segment<2>(2 * k);
    for (std::size_t w = 0; w < p_.walls.size(); ++w) {
      if (slot_[w] < 0) continue;
      const int col = nu_ + 2 * slot_[w];
      const Vec2 a{std::cos(theta_[w]), std::sin(theta_[w])};
      const Vec2 da{-a.y, a.x};
      for (Vec2 v : p_.walls[w].vertices) limit(off_[w] - dot(a, v), -dot(da, v) * d(col) + d(col + 1));
      for (int k = 0; k <= N_; ++k) {
        const double r = k == 0 ? r0_[w] : r_eff_;
        if (k == 0 && r <= 0) continue;
        const Vec2 pk = xs_[k].position;
        limit(dot(a, pk) - off_[w] + r, a.x * dx[k](0) + a.y * dx[k](1) + dot(da, pk) * d(col) - d(col + 1));
      }
    }
    for (int k = 1; k <= N_; ++k) {
      limit(c_.v_min - xs_[k].speed, -dx[k](3));
      limit(xs_[k].speed - c_.v_max, dx[k](3));
    }
    if (c_.terminal_rest) limit(xs_[N_].speed - c_.v_min - c_.rest_tol, dx[N_](3));
    return alpha;
  }

  /// Penalty rounds until the barrier merit is finite at z.
  bool drive_feasible(std::vector<double>& z) {
    double rho = c_.penalty_init;
    damping_ = 1e-4;
    for (int round = 0; round < c_.max_penalty_rounds && !out_of_budget(); ++round) {
      double value = 0.0;
      for (int it = 0; it < c_.max_inner; ++it) {
        if (!newton_step(z, Mode::kPenalty, rho, value) && !activate_pending(z)) break;
      }
      polish_planes(z);
      if (std::isfinite(assemble(z, Mode::kBarrier, 1.0, false))) return true;
      rho *= 10.0;
    }
    return false;
  }

  /// Barrier path from mu down to barrier_min. True when the last level
  /// converged within budget.
  bool follow_barrier(std::vector<double>& z, double& mu) {
    damping_ = 1e-4;
    while (true) {
      bool level_done = false;
      double value = 0.0;
      for (int it = 0; it < c_.max_inner; ++it) {
        if (!newton_step(z, Mode::kBarrier, mu, value)) {
          if (activate_pending(z)) continue;
          level_done = true;
          break;
        }
      }
      if (out_of_budget()) return false;
      if (mu <= c_.barrier_min) return level_done;
      mu = std::max(mu * c_.barrier_decrease, c_.barrier_min);
    }
  }

  /// Trajectory and planes at z, with planes re-optimized for every wall and
  /// violations measured against the nominal radius.
  Solution extract(const std::vector<double>& z) {
    const std::vector<double> u(z.begin(), z.begin() + nu_);
    unpack_planes(z);
    rollout(u, false);
    Solution s;
    s.states = xs_;
    for (auto& x : s.states) x.heading = wrap_angle(x.heading);
    for (int k = 0; k < N_; ++k) {
      // Effective inputs: what the speed projection let through.
      s.inputs.push_back({clamped_[k] ? (xs_[k + 1].speed - xs_[k].speed) / c_.dt : u[2 * k], u[2 * k + 1]});
    }
    s.cost = objective(u);
    const auto pts = positions();
    const double r = c_.wall_radius();
    s.max_violation = 0.0;
    for (std::size_t w = 0; w < p_.walls.size(); ++w) {
      const double r0 = std::min(r, r0_[w]);
      auto margin_of = [&](double tt, double bb) {
        const Vec2 a{std::cos(tt), std::sin(tt)};
        double m = std::numeric_limits<double>::infinity();
        for (Vec2 v : p_.walls[w].vertices) m = std::min(m, dot(a, v) - bb);
        for (std::size_t k = 0; k < pts.size(); ++k) m = std::min(m, bb - dot(a, pts[k]) - (k == 0 ? r0 : r));
        return m;
      };
      double t = theta_[w], b = off_[w];
      double m = slot_[w] >= 0 ? margin_of(t, b) : -std::numeric_limits<double>::infinity();
      double t2 = 0.0, b2 = 0.0;
      best_plane(pts, p_.walls[w], t2, b2);
      if (margin_of(t2, b2) > m) {
        t = t2;
        b = b2;
        m = margin_of(t, b);
      }
      s.planes.push_back({{std::cos(t), std::sin(t)}, b});
      s.max_violation = std::max(s.max_violation, -m);
    }
    return s;
  }

  const NavigationProblem& p_;
  const MPCConfig& c_;
  const int N_;
  const int nu_;
  const double r_eff_;

  double cpu0_ = 0.0;
  int evals_ = 0;
  double damping_ = 1e-4;
  std::vector<AgentState> xs_;
  std::vector<bool> clamped_;
  // Step Jacobians of the last rollout with sensitivities.
  std::vector<Matrix4> A_;
  std::vector<Matrix42> B_;
  // Per-stage state curvature, state gradient and plane cross terms.
  std::vector<Matrix4> Mk_;
  Eigen::VectorXd qall_;
  Eigen::MatrixXd R_;
  std::vector<double> theta_, off_, r0_;
  std::vector<bool> active_;
  std::vector<std::size_t> pending_;
  std::vector<int> slot_;
  int n_active_ = 0;
  Eigen::VectorXd grad_;
  Eigen::MatrixXd H_;
  std::vector<Vec2> qpos_;
};

}  // namespace detail

/// Solves one problem, warm-started from the previous solution shifted by
/// one step. Returns the best iterate found whose violation is within
/// feasibility_tol, else the last iterate; status is kInfeasible when the
/// violation exceeds infeasible_tol. Reported inputs are the effective ones
/// after speed projection, so feeding inputs[0] to dynamics_step reproduces
/// states[1] exactly.
inline Solution solve(const NavigationProblem& problem, const Solution* warm = nullptr) {
  problem.config.validate();
  detail::ShootingSolver s(problem);
  return s.solve(warm);
}

/// Objective value of an input sequence (after speed projection).
inline double trajectory_cost(const NavigationProblem& p, const std::vector<ControlInput>& inputs) {
  const MPCConfig& c = p.config;
  AgentState x = p.x_init;
  double J = 0.0;
  for (int k = 0; k < c.N_t; ++k) {
    J += stage_cost(x, inputs[k], p.targets[k], p.speed_limits[k], c);
    x = dynamics_step(x, inputs[k], c.dt, c.rk4);
    x.speed = project_speed(x.speed, c);
  }
  return J + terminal_cost(x, p.targets[c.N_t], c);
}

/// Maximal braking along the current heading without reversing.
inline ControlInput fallback_on_infeasible(const AgentState& x, const MPCConfig& c) {
  return {std::max(c.a_min, (c.v_min - x.speed) / c.dt), 0.0};
}

// ------------------------------------------------------ problem assembly

namespace detail {

/// Point `depth` along `dir` from `from`, pulled back until it keeps the
/// wall radius (or `depth`, if smaller) inside `poly`.
inline Vec2 inset_point(const Polygon& poly, Vec2 from, Vec2 dir, double depth, double radius) {
  while (depth > 0.05 && inner_clearance(poly, from + dir * depth) < std::min(radius, depth)) depth *= 0.8;
  return from + dir * depth;
}

}  // namespace detail

/// Gap between a waiting agent's disc and the interface it waits at.
inline constexpr double kWaitGap = 0.05;

/// Where the agent aims while in route step `s`. With the next area claimed
/// it aims past the interface into that area; with the next area unclaimed it
/// waits just short of the interface; in the final area it aims at the goal.
///
/// With `from` given for the current step, an agent too far off the
/// interface axis to pass it in a straight line first aims at a point on the
/// axis `approach_depth` back inside its area.
inline Vec2 area_target(const SemanticMap& map, const Route& route, std::size_t s, std::size_t claim_last, Vec2 goal,
                        const MPCConfig& c, const Vec2* from = nullptr) {
  if (s >= route.last()) return goal;
  const AreaId here = route.areas[s];
  const AreaId next = route.areas[s + 1];
  const auto between = map.interfaces_between(here, next);
  if (between.empty()) return centroid(map.area(next).polygon);
  const Segment seg = map.interface(between.front()).segment;
  const Vec2 mid = (seg.a + seg.b) * 0.5;
  const Polygon& poly = map.area(next).polygon;
  Vec2 n = normalized(perp(seg.b - seg.a));
  if (dot(n, centroid(poly) - mid) < 0) n = n * -1.0;
  const Vec2 past = detail::inset_point(poly, mid, n, c.target_depth, c.wall_radius());
  if (from && s == route.current) {
    const Vec2 t = normalized(seg.b - seg.a);
    const double lat = std::abs(dot(*from - mid, t));
    const double back = std::max(0.0, -dot(*from - mid, n));
    const double room = std::max(0.0, 0.5 * distance(seg.a, seg.b) - c.wall_radius());
    const double depth = std::max(distance(past, mid), 0.05);
    if (lat > 0.8 * room * (back + depth) / depth) {
      return detail::inset_point(map.area(here).polygon, mid, n * -1.0, c.approach_depth, c.wall_radius());
    }
  }
  if (s < claim_last) return past;
  return detail::inset_point(map.area(here).polygon, mid, n * -1.0, c.wall_radius() + kWaitGap, c.wall_radius());
}

/// Route step per horizon step, predicted from the previous trajectory
/// shifted by one step. Advances only once a predicted position has left the
/// current area and lies in the next one, and never past the claim.
inline std::vector<std::size_t> predict_area_schedule(const Solution* prev, const SemanticMap& map, const Route& route,
                                                      std::size_t claim_last, int N_t) {
  std::vector<std::size_t> out(N_t + 1, route.current);
  if (!prev || prev->states.size() != static_cast<std::size_t>(N_t + 1)) return out;
  std::size_t s = route.current;
  const std::size_t cap = std::min(claim_last, route.last());
  for (int k = 0; k <= N_t; ++k) {
    const Vec2 p = prev->states[std::min(k + 1, N_t)].position;
    while (s < cap && !map.area_contains(route.areas[s], p, -1e-9) && map.area_contains(route.areas[s + 1], p)) ++s;
    out[k] = s;
  }
  return out;
}

/// Walls within reach of the agent over one horizon.
inline std::vector<WallElement> walls_in_reach(const std::vector<WallElement>& walls, Vec2 p, double reach) {
  std::vector<WallElement> out;
  for (const auto& w : walls) {
    double d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i + 1 < w.vertices.size(); ++i) d = std::min(d, point_segment_distance(p, {w.vertices[i], w.vertices[i + 1]}));
    if (d <= reach) out.push_back(w);
  }
  return out;
}

/// One agent's optimization problem from its route, claimed prefix
/// [k_t, claim_last], goal point and state.
inline NavigationProblem build_problem(const SemanticMap& map, const Route& route, std::size_t claim_last, Vec2 goal,
                                       const AgentState& x, const Solution* prev, const MPCConfig& c) {
  NavigationProblem p;
  p.config = c;
  p.x_init = x;
  claim_last = std::clamp(claim_last, route.current, route.last());
  AreaSet claimed;
  for (std::size_t k = route.current; k <= claim_last; ++k) claimed.insert(route.areas[k]);
  const auto cls = classify_interfaces(map, route.areas, claimed);
  const auto walls = boundaries_for_agent(map, claimed, cls.inactive);
  p.walls = walls_in_reach(walls, x.position, c.horizon_reach() + c.wall_radius() + 0.3);
  p.schedule = predict_area_schedule(prev, map, route, claim_last, c.N_t);
  for (std::size_t s : p.schedule) {
    p.schedule_areas.push_back(route.areas[s]);
    p.targets.push_back(area_target(map, route, s, claim_last, goal, c, &x.position));
    const auto& lim = map.area(route.areas[s]).speed_limit;
    p.speed_limits.push_back(lim ? std::min(*lim, c.v_max) : c.v_max);
  }
  return p;
}

}  // namespace claimnav
