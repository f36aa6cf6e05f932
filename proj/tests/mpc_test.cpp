#include <gtest/gtest.h>

#include <random>

#include "claimnav/maps.hpp"
#include "claimnav/mpc.hpp"

using namespace claimnav;

namespace {

NavigationProblem open_problem(AgentState x, Vec2 target, std::vector<WallElement> walls = {}, MPCConfig c = {}) {
  NavigationProblem p;
  p.config = c;
  p.x_init = x;
  p.walls = std::move(walls);
  p.schedule.assign(c.N_t + 1, 0);
  p.schedule_areas.assign(c.N_t + 1, AreaId{0});
  p.targets.assign(c.N_t + 1, target);
  p.speed_limits.assign(c.N_t + 1, c.v_max);
  return p;
}

WallElement wall(Vec2 a, Vec2 b) { return {{a, b}, false, 0}; }

double rel_err(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    d += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return std::sqrt(d) / std::max({std::sqrt(na), std::sqrt(nb), 1e-8});
}

template <class F>
std::vector<double> central_diff(F f, std::vector<double> x, double h = 1e-6) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double x0 = x[i];
    x[i] = x0 + h;
    const double fp = f(x);
    x[i] = x0 - h;
    const double fm = f(x);
    x[i] = x0;
    g[i] = (fp - fm) / (2 * h);
  }
  return g;
}

void check_solution_invariants(const NavigationProblem& p, const Solution& s) {
  const MPCConfig& c = p.config;
  ASSERT_EQ(s.states.size(), static_cast<std::size_t>(c.N_t + 1));
  ASSERT_EQ(s.inputs.size(), static_cast<std::size_t>(c.N_t));
  for (int k = 0; k < c.N_t; ++k) {
    const auto& u = s.inputs[k];
    EXPECT_GE(u.accel, c.a_min - 1e-12);
    EXPECT_LE(u.accel, c.a_max + 1e-12);
    EXPECT_GE(u.yaw_rate, c.omega_min - 1e-12);
    EXPECT_LE(u.yaw_rate, c.omega_max + 1e-12);
    const AgentState next = dynamics_step(s.states[k], u, c.dt, c.rk4);
    EXPECT_NEAR(next.position.x, s.states[k + 1].position.x, 1e-8);
    EXPECT_NEAR(next.position.y, s.states[k + 1].position.y, 1e-8);
    EXPECT_NEAR(wrap_angle(next.heading - s.states[k + 1].heading), 0.0, 1e-8);
    EXPECT_NEAR(next.speed, s.states[k + 1].speed, 1e-8);
  }
  for (const auto& x : s.states) {
    EXPECT_GE(x.speed, c.v_min - 1e-12);
    EXPECT_LE(x.speed, c.v_max + 1e-12);
    EXPECT_GT(x.heading, -M_PI);
    EXPECT_LE(x.heading, M_PI);
  }
  if (s.status != SolveStatus::kInfeasible) {
    const auto res = hyperplane_residuals(positions_of(s.states), p.walls, s.planes, c.wall_radius());
    EXPECT_TRUE(res.satisfied(1e-6)) << res.min();
  }
}

}  // namespace

TEST(Dynamics, StraightCoast) {
  const auto x = dynamics_step({{0, 0}, 0, 0.5}, {0, 0}, 0.2);
  EXPECT_NEAR(x.position.x, 0.1, 1e-15);
  EXPECT_NEAR(x.position.y, 0.0, 1e-15);
  EXPECT_EQ(x.heading, 0.0);
  EXPECT_EQ(x.speed, 0.5);
}

TEST(Dynamics, EulerOrderLeavesPositionBeforeAccelerating) {
  const auto x = dynamics_step({{0, 0}, 0, 0}, {0.5, 0}, 0.2);
  EXPECT_NEAR(x.speed, 0.1, 1e-15);
  EXPECT_EQ(x.position, (Vec2{0, 0}));
}

TEST(Dynamics, TurnUpdatesHeadingAfterMoving) {
  const auto x = dynamics_step({{0, 0}, 0, 0.5}, {0, 0.5}, 0.2);
  EXPECT_NEAR(x.heading, 0.1, 1e-15);
  EXPECT_NEAR(x.position.x, 0.1, 1e-15);
  EXPECT_NEAR(x.position.y, 0.0, 1e-15);
}

TEST(Dynamics, HeadingWrapsIntoHalfOpenInterval) {
  const auto x = dynamics_step({{0, 0}, M_PI - 0.01, 0}, {0, 0.5}, 0.2);
  EXPECT_NEAR(x.heading, -M_PI + 0.09, 1e-12);
  EXPECT_EQ(wrap_angle(-M_PI), M_PI);
}

TEST(Dynamics, Rk4MatchesEulerForStraightLines) {
  const auto e = dynamics_step({{1, 2}, 0.3, 0.4}, {0, 0}, 0.2);
  const auto r = dynamics_step({{1, 2}, 0.3, 0.4}, {0, 0}, 0.2, true);
  EXPECT_NEAR(e.position.x, r.position.x, 1e-12);
  EXPECT_NEAR(e.position.y, r.position.y, 1e-12);
}

TEST(Config, ValidationNamesField) {
  MPCConfig c;
  EXPECT_NO_THROW(c.validate());
  c.N_t = 0;
  try {
    c.validate();
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("N_t"), std::string::npos);
  }
  c = {};
  c.r_soft = 0.1;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.a_min = 1.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(Hyperplane, FeasibleExample) {
  const auto res = hyperplane_residuals({{0, 0}}, {wall({1, 0}, {1, 1})}, {{{1, 0}, 0.5}}, 0.15);
  EXPECT_DOUBLE_EQ(res.vertex[0], 0.5);
  EXPECT_DOUBLE_EQ(res.vertex[1], 0.5);
  EXPECT_DOUBLE_EQ(res.agent[0], 0.5 - 0.15);
  EXPECT_DOUBLE_EQ(res.norm[0], 0.0);
  EXPECT_TRUE(res.satisfied(0.0));
}

TEST(Hyperplane, AgentOnWallSideViolates) {
  const auto res = hyperplane_residuals({{0.9, 0.5}}, {wall({1, 0}, {1, 1})}, {{{1, 0}, 0.5}}, 0.15);
  // a.p - b = 0.4, well above -r.
  EXPECT_NEAR(res.agent[0], -0.4 - 0.15, 1e-12);
  EXPECT_FALSE(res.satisfied(1e-6));
}

TEST(Hyperplane, LongNormalViolates) {
  const auto res = hyperplane_residuals({{-5, 0}}, {wall({1, 0}, {1, 1})}, {{{1.2, 0}, 0.5}}, 0.15);
  EXPECT_NEAR(res.norm[0], -0.2, 1e-12);
  EXPECT_FALSE(res.satisfied(1e-6));
}

TEST(Hyperplane, RejectsMismatchedPlaneCount) {
  EXPECT_THROW(hyperplane_residuals({{0, 0}}, {wall({1, 0}, {1, 1})}, {}, 0.15), std::invalid_argument);
}

TEST(Hyperplane, SoundnessOnRandomInstances) {
  // Any plane set passing the residual check must keep every point at least r
  // from every wall, measured directly.
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> pos(-2, 2), ang(-M_PI, M_PI), off(-1, 1), len(0.9, 1.1);
  const double r = 0.15;
  int passing = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<WallElement> walls;
    std::vector<Hyperplane> planes;
    std::vector<Vec2> pts;
    const int n_pts = 1 + trial % 21;
    for (int i = 0; i < n_pts; ++i) pts.push_back({pos(rng), pos(rng)});
    const int n_walls = 1 + trial % 3;
    for (int w = 0; w < n_walls; ++w) {
      const Vec2 a{pos(rng) * 2, pos(rng) * 2};
      walls.push_back(wall(a, a + Vec2{pos(rng), pos(rng)}));
      // Half the planes come from exact separation, the rest are random.
      Hyperplane h;
      if (trial % 2 == 0) {
        double t = 0, b = 0;
        detail::best_plane(pts, walls.back(), t, b);
        h = {{std::cos(t), std::sin(t)}, b};
      } else {
        const double t = ang(rng);
        h = {Vec2{std::cos(t), std::sin(t)} * len(rng), off(rng)};
      }
      planes.push_back(h);
    }
    const auto res = hyperplane_residuals(pts, walls, planes, r);
    if (!res.satisfied(1e-7)) continue;
    ++passing;
    for (const auto& w : walls) {
      for (Vec2 p : pts) {
        ASSERT_GE(point_segment_distance(p, {w.vertices[0], w.vertices[1]}), r - 1e-6) << "trial " << trial;
      }
      ASSERT_GE(hull_segment_distance(pts, {w.vertices[0], w.vertices[1]}), r - 1e-6) << "trial " << trial;
    }
  }
  EXPECT_GT(passing, 100);
}

TEST(Hyperplane, BestPlaneMarginEqualsHullDistance) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> pos(-2, 2);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Vec2> pts;
    for (int i = 0; i < 6; ++i) pts.push_back({pos(rng), pos(rng)});
    const Vec2 a{pos(rng) * 3, pos(rng) * 3};
    const WallElement w = wall(a, a + Vec2{pos(rng), pos(rng)});
    const double d = hull_segment_distance(pts, {w.vertices[0], w.vertices[1]});
    double t = 0, b = 0;
    const double m = detail::best_plane(pts, w, t, b);
    if (d > 1e-9) {
      EXPECT_NEAR(m, d, 1e-9) << trial;
    }
  }
}

TEST(Gradients, StageAndTerminalCost) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1, 1);
  MPCConfig c;
  for (int trial = 0; trial < 100; ++trial) {
    const Vec2 target{u(rng) * 3, u(rng) * 3};
    const double lim = 0.2 + 0.3 * std::abs(u(rng));
    std::vector<double> z{u(rng) * 3, u(rng) * 3, u(rng) * M_PI, 0.5 * std::abs(u(rng)), 0.5 * u(rng), 0.5 * u(rng)};
    auto f = [&](const std::vector<double>& v) {
      return stage_cost({{v[0], v[1]}, v[2], v[3]}, {v[4], v[5]}, target, lim, c);
    };
    Vector6 g;
    stage_cost({{z[0], z[1]}, z[2], z[3]}, {z[4], z[5]}, target, lim, c, &g);
    EXPECT_LE(rel_err({g.data(), g.data() + 6}, central_diff(f, z)), 1e-5) << trial;

    auto n = [&](const std::vector<double>& v) { return terminal_cost({{v[0], v[1]}, v[2], v[3]}, target, c); };
    Eigen::Vector4d gn;
    terminal_cost({{z[0], z[1]}, z[2], z[3]}, target, c, &gn);
    EXPECT_LE(rel_err({gn.data(), gn.data() + 4}, central_diff(n, {z.begin(), z.begin() + 4})), 1e-5) << trial;
  }
}

TEST(Gradients, ConstraintResiduals) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-2, 2);
  for (int trial = 0; trial < 100; ++trial) {
    const Vec2 v{u(rng), u(rng)};
    const double r = 0.19;
    std::vector<double> z{u(rng), u(rng), u(rng), u(rng), u(rng)};  // a, b, p
    Eigen::Vector3d gv;
    vertex_residual({z[0], z[1]}, z[2], v, &gv);
    auto fv = [&](const std::vector<double>& s) { return vertex_residual({s[0], s[1]}, s[2], v); };
    EXPECT_LE(rel_err({gv.data(), gv.data() + 3}, central_diff(fv, {z.begin(), z.begin() + 3})), 1e-5);

    Eigen::Matrix<double, 5, 1> ga;
    agent_residual({z[0], z[1]}, z[2], {z[3], z[4]}, r, &ga);
    auto fa = [&](const std::vector<double>& s) { return agent_residual({s[0], s[1]}, s[2], {s[3], s[4]}, r); };
    EXPECT_LE(rel_err({ga.data(), ga.data() + 5}, central_diff(fa, z)), 1e-5);

    Eigen::Vector2d gn;
    norm_residual({z[0], z[1]}, &gn);
    auto fn = [&](const std::vector<double>& s) { return norm_residual({s[0], s[1]}); };
    EXPECT_LE(rel_err({gn.data(), gn.data() + 2}, central_diff(fn, {z.begin(), z.begin() + 2})), 1e-5);
  }
}

TEST(Gradients, DynamicsJacobian) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-1, 1);
  for (bool rk4 : {false, true}) {
    for (int trial = 0; trial < 100; ++trial) {
      const AgentState x{{u(rng), u(rng)}, 0.9 * M_PI * u(rng), 0.25 + 0.2 * u(rng)};
      const ControlInput in{0.5 * u(rng), 0.5 * u(rng)};
      Matrix4 A;
      Matrix42 B;
      dynamics_jacobian(x, in, 0.2, rk4, A, B);
      for (int out = 0; out < 4; ++out) {
        auto f = [&](const std::vector<double>& s) {
          const auto n = dynamics_step({{s[0], s[1]}, s[2], s[3]}, {s[4], s[5]}, 0.2, rk4);
          const double v[4] = {n.position.x, n.position.y, n.heading, n.speed};
          return v[out];
        };
        const auto fd = central_diff(f, {x.position.x, x.position.y, x.heading, x.speed, in.accel, in.yaw_rate});
        std::vector<double> an{A(out, 0), A(out, 1), A(out, 2), A(out, 3), B(out, 0), B(out, 1)};
        EXPECT_LE(rel_err(an, fd), 1e-5) << "rk4=" << rk4 << " row " << out;
      }
    }
  }
}

TEST(Gradients, FullMeritThroughRollout) {
  // Speeds and accelerations stay inside the box so no projection kink is hit.
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-1, 1);
  using Mode = detail::ShootingSolver::Mode;
  int barrier_points = 0;
  for (int trial = 0; trial < 100; ++trial) {
    MPCConfig c;
    c.terminal_rest = false;
    const AgentState x{{u(rng), u(rng)}, M_PI * u(rng), 0.25 + 0.1 * u(rng)};
    std::vector<WallElement> walls{wall({2.5 + u(rng), -3}, {2.5 + u(rng), 3}), wall({-3, -2 + 0.3 * u(rng)}, {3, -2})};
    auto p = open_problem(x, {3 * u(rng), 3 * u(rng)}, walls, c);
    for (auto& l : p.speed_limits) l = 0.2 + 0.2 * std::abs(u(rng));
    std::vector<double> in;
    for (int k = 0; k < c.N_t; ++k) {
      in.push_back(0.02 * u(rng));
      in.push_back(0.4 * u(rng));
    }
    detail::ShootingSolver s(p);
    s.setup_for_test(in);
    auto z = s.pack_for_test(in);
    for (std::size_t i = 2 * c.N_t; i < z.size(); i += 2) {
      z[i] += 0.05 * u(rng);
      z[i + 1] += 0.05 * u(rng);
    }
    for (Mode mode : {Mode::kPenalty, Mode::kBarrier}) {
      const double param = mode == Mode::kPenalty ? 1e3 : 1e-2;
      std::vector<double> g;
      const double v = s.value_and_gradient(z, mode, param, &g);
      if (!std::isfinite(v)) continue;
      barrier_points += mode == Mode::kBarrier;
      const auto fd = central_diff([&](const std::vector<double>& w) { return s.value_and_gradient(w, mode, param, nullptr); }, z);
      EXPECT_LE(rel_err(g, fd), 1e-5) << "trial " << trial << " barrier " << (mode == Mode::kBarrier);
    }
  }
  EXPECT_GT(barrier_points, 20);
}

TEST(Solve, DrivesTowardsTargetWithinSpeedLimit) {
  const auto p = open_problem({{0, 0}, 0, 0}, {2, 0});
  const auto s = solve(p);
  check_solution_invariants(p, s);
  EXPECT_NE(s.status, SolveStatus::kInfeasible);
  EXPECT_GT(s.states.back().position.x, 0.8);
  EXPECT_GT(s.inputs[0].accel, 0.0);
  for (const auto& x : s.states) EXPECT_LE(x.speed, 0.5 + 1e-12);
}

TEST(Solve, FixedPointAtTarget) {
  const auto p = open_problem({{1, 1}, 0.4, 0}, {1, 1});
  const auto s = solve(p);
  check_solution_invariants(p, s);
  EXPECT_EQ(s.status, SolveStatus::kOptimal);
  // Speeds stay strictly above v_min, so the agent may creep by a hair.
  for (const auto& u : s.inputs) {
    EXPECT_NEAR(u.accel, 0.0, 2e-2);
    EXPECT_NEAR(u.yaw_rate, 0.0, 1e-3);
  }
  for (const auto& x : s.states) EXPECT_LT(norm(x.position - Vec2{1, 1}), 5e-3);
  EXPECT_NEAR(s.cost, 0.0, 1e-3);
}

TEST(Solve, NarrowCorridorKeepsClearance) {
  MPCConfig c;
  // Corridor of width 0.4 along x.
  const std::vector<WallElement> walls{wall({-1, -0.2}, {4, -0.2}), wall({-1, 0.2}, {4, 0.2})};
  auto p = open_problem({{0, 0}, 0, 0.3}, {3, 0.15}, walls, c);
  Solution prev;
  for (int step = 0; step < 15; ++step) {
    const auto s = solve(p, step ? &prev : nullptr);
    check_solution_invariants(p, s);
    ASSERT_NE(s.status, SolveStatus::kInfeasible);
    for (const auto& x : s.states) {
      for (const auto& w : walls) {
        EXPECT_GE(point_segment_distance(x.position, {w.vertices[0], w.vertices[1]}), c.r_v - 1e-6);
      }
    }
    prev = s;
    p.x_init = s.states[1];
  }
  EXPECT_GT(p.x_init.position.x, 0.8);
}

TEST(Solve, TurnsAroundFromRest) {
  const auto p0 = open_problem({{0, 0}, 0, 0}, {-2, 0});
  auto p = p0;
  Solution prev;
  for (int step = 0; step < 40; ++step) {
    const auto s = solve(p, step ? &prev : nullptr);
    ASSERT_NE(s.status, SolveStatus::kInfeasible);
    prev = s;
    p.x_init = s.states[1];
  }
  EXPECT_LT(p.x_init.position.x, -1.0);
}

TEST(Solve, RoundsCornerBetweenWalls) {
  // L-shaped passage: up a 0.8 m wide shaft, then right.
  const std::vector<WallElement> walls{
      wall({-0.4, -1}, {-0.4, 1.4}), wall({-0.4, 1.4}, {3, 1.4}), wall({0.4, -1}, {0.4, 0.6}), wall({0.4, 0.6}, {3, 0.6})};
  auto p = open_problem({{0, 0}, M_PI / 2, 0}, {2.5, 1.0}, walls);
  // One plane per wall cannot wrap a corner within a single horizon, so the
  // targets follow the areas: the junction square first, then the goal.
  const Vec2 junction{0.0, 1.0};
  bool in_junction = false;
  Solution prev;
  double min_clear = 1e9;
  for (int step = 0; step < 80; ++step) {
    in_junction = in_junction || norm(p.x_init.position - junction) < 0.3;
    p.targets.assign(p.targets.size(), in_junction ? Vec2{2.5, 1.0} : junction);
    const auto s = solve(p, step ? &prev : nullptr);
    ASSERT_NE(s.status, SolveStatus::kInfeasible) << step;
    check_solution_invariants(p, s);
    prev = s;
    p.x_init = s.states[1];
    for (const auto& w : walls) {
      min_clear = std::min(min_clear, point_segment_distance(p.x_init.position, {w.vertices[0], w.vertices[1]}));
    }
  }
  EXPECT_GT(p.x_init.position.x, 1.5);
  EXPECT_GE(min_clear, 0.19 - 1e-6);
}

TEST(Solve, RecedingHorizonCostDoesNotIncrease) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int trial = 0; trial < 20; ++trial) {
    auto p = open_problem({{u(rng), u(rng)}, M_PI * u(rng), 0.5 * std::abs(u(rng))}, {3 * u(rng), 3 * u(rng)});
    const auto s = solve(p);
    auto p2 = p;
    p2.x_init = s.states[1];
    std::vector<ControlInput> shifted(s.inputs.begin() + 1, s.inputs.end());
    shifted.push_back({0, 0});
    const double bound = trajectory_cost(p2, shifted);
    const auto s2 = solve(p2, &s);
    EXPECT_LE(s2.cost, bound + 1e-6) << trial;
  }
}

TEST(Solve, WarmStartIsFast) {
  const std::vector<WallElement> walls{wall({-1, -0.3}, {6, -0.3}), wall({-1, 0.3}, {6, 0.3})};
  auto p = open_problem({{0, 0}, 0, 0}, {5, 0}, walls);
  Solution prev;
  double total = 0;
  const int steps = 50;
  for (int step = 0; step < steps; ++step) {
    const auto s = solve(p, step ? &prev : nullptr);
    total += s.solve_time;
    prev = s;
    p.x_init = s.states[1];
  }
  std::cout << "mean solve time " << 1e3 * total / steps << " ms\n";
  EXPECT_LT(total / steps, 0.05);
}

TEST(Fallback, Examples) {
  MPCConfig c;
  auto f = fallback_on_infeasible({{0, 0}, 0, 0.5}, c);
  EXPECT_DOUBLE_EQ(f.accel, -0.5);
  EXPECT_EQ(f.yaw_rate, 0.0);
  f = fallback_on_infeasible({{0, 0}, 0, 0.0}, c);
  EXPECT_EQ(f.accel, 0.0);
  f = fallback_on_infeasible({{0, 0}, 0, 0.05}, c);
  EXPECT_NEAR(f.accel, -0.25, 1e-12);
  EXPECT_NEAR(dynamics_step({{0, 0}, 0, 0.05}, f, c.dt).speed, 0.0, 1e-15);
}

TEST(Schedule, StationaryAgentStaysInCurrentArea) {
  const auto m = make_tjunction();
  const Route r{AgentId{0}, {AreaId{3}, AreaId{1}, AreaId{2}}, 0};
  Solution prev;
  prev.states.assign(21, AgentState{{-4.5, 2.5}, 0, 0});
  const auto s = predict_area_schedule(&prev, m, r, 2, 20);
  ASSERT_EQ(s.size(), 21u);
  for (auto k : s) EXPECT_EQ(k, 0u);
  EXPECT_EQ(predict_area_schedule(nullptr, m, r, 2, 20), s);
}

TEST(Schedule, CrossingAtStepSeven) {
  const auto m = make_tjunction();
  const Route r{AgentId{0}, {AreaId{3}, AreaId{1}, AreaId{2}}, 0};
  // S_3 ends at x = -3.5; the shifted trajectory (index k+1) enters S_1 at
  // k = 7.
  Solution prev;
  for (int k = 0; k <= 20; ++k) prev.states.push_back({{std::min(-4.25 + 0.1 * k, -3.0), 2.5}, 0, 0.5});
  const auto s = predict_area_schedule(&prev, m, r, 2, 20);
  for (int k = 0; k <= 20; ++k) EXPECT_EQ(s[k], k < 7 ? 0u : 1u) << k;
}

TEST(Schedule, ClampsToClaimedPrefix) {
  const auto m = make_tjunction();
  const Route r{AgentId{0}, {AreaId{3}, AreaId{1}, AreaId{2}}, 0};
  Solution prev;
  for (int k = 0; k <= 20; ++k) prev.states.push_back({{-4.0 + 0.2 * k, 2.5}, 0, 0.5});
  const auto s = predict_area_schedule(&prev, m, r, 1, 20);
  EXPECT_EQ(s.back(), 1u);
  for (auto k : s) EXPECT_LE(k, 1u);
}

TEST(BuildProblem, AllClaimedOpensRoute) {
  const auto m = make_tjunction();
  const Route r{AgentId{0}, {AreaId{3}, AreaId{1}, AreaId{2}}, 0};
  const Vec2 goal{-1.0, 2.5};
  const auto p = build_problem(m, r, 2, goal, {{-4.5, 2.5}, 0, 0}, nullptr, MPCConfig{});
  ASSERT_EQ(p.schedule.size(), 21u);
  for (const auto& w : p.walls) {
    if (!w.is_virtual) continue;
    EXPECT_NE(w.source_id, 4);  // I_4
    EXPECT_NE(w.source_id, 2);  // I_2
  }
  // Aiming past I_4 into S_1.
  EXPECT_GT(p.targets[0].x, -3.5);
}

TEST(BuildProblem, OnlyCurrentAreaFencesAgent) {
  const auto m = make_tjunction();
  const Route r{AgentId{0}, {AreaId{3}, AreaId{1}, AreaId{2}}, 0};
  const auto p = build_problem(m, r, 0, {-1.0, 2.5}, {{-4.5, 2.5}, 0, 0}, nullptr, MPCConfig{});
  std::set<int> virt;
  for (const auto& w : p.walls) {
    if (w.is_virtual) virt.insert(w.source_id);
  }
  EXPECT_EQ(virt, (std::set<int>{4, 5}));
  // Waits just short of the I_4 midpoint.
  const MPCConfig c;
  EXPECT_NEAR(p.targets[0].x, -3.5 - c.wall_radius() - kWaitGap, 1e-12);
  EXPECT_NEAR(p.targets[0].y, 2.5, 1e-12);
  const auto s = solve(p);
  EXPECT_NE(s.status, SolveStatus::kInfeasible);
  for (const auto& x : s.states) EXPECT_LE(x.position.x, -3.5 - 0.19 + 1e-6);
}

TEST(BuildProblem, FinalAreaTargetsGoal) {
  const auto m = make_tjunction();
  const Route r{AgentId{0}, {AreaId{3}, AreaId{1}, AreaId{2}}, 2};
  const Vec2 goal{-1.0, 2.5};
  const auto p = build_problem(m, r, 2, goal, {{-2.0, 2.5}, 0, 0}, nullptr, MPCConfig{});
  for (const auto& t : p.targets) EXPECT_EQ(t, goal);
}
