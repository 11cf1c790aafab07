#include <gtest/gtest.h>

#include <cmath>

#include "ppdgd/ppdgd.hpp"
#include "test_support.hpp"

using namespace ppdgd;

namespace {

Vector v1(double a) { return Vector::Constant(1, a); }

/// One coordinate with the regulation cost, f = 1/2 x^2, A = 1, B = -1.
/// With this B, -(B^T lambda) = lambda.
Problem kinked_scalar_problem() {
  QuadraticSmoothFn f{Matrix::Identity(1, 1), Vector::Zero(1), 0.0};
  return build_problem(f, {casestudy::regulation_cost()}, Matrix::Ones(1, 1), -Matrix::Ones(1, 1),
                       Vector::Zero(1), BoxSet::free(1), BoxSet::box(v1(-1.0), v1(1.0)));
}

void expect_code(ErrorCode code, const auto& fn) {
  try {
    fn();
    FAIL() << "expected " << to_string(code);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), code) << e.what();
  }
}

}  // namespace

TEST(SelectSubgradient, ClampsIntoClarkeInterval) {
  const Problem P = kinked_scalar_problem();
  EXPECT_DOUBLE_EQ(select_subgradient(P, v1(0.2), v1(0.3))[0], 0.3);
  EXPECT_DOUBLE_EQ(select_subgradient(P, v1(0.2), v1(1.0))[0], 0.4);
  EXPECT_DOUBLE_EQ(select_subgradient(P, v1(0.2), v1(-1.0))[0], 0.2);
  // Smooth point: the selection is the derivative.
  EXPECT_DOUBLE_EQ(select_subgradient(P, v1(0.5), v1(7.0))[0], 2 * 0.5);

  const Drift sliding = rhs(P, State{v1(0.2), v1(0.3), 0.0}, 1.0);
  EXPECT_DOUBLE_EQ(sliding.dy[0], 0.0);
  const Drift leaving = rhs(P, State{v1(0.2), v1(1.0), 0.0}, 1.0);
  EXPECT_DOUBLE_EQ(leaving.dy[0], 0.6);
}

TEST(Rhs, ScalarExample) {
  // x*(lambda) = -lambda, so dlambda = -lambda + y and dy = -y - lambda.
  const Problem P = fixtures::one_dim_problem();
  const Drift d = rhs(P, State{v1(0.5), v1(0.2), 0.0}, 1.0);
  EXPECT_DOUBLE_EQ(d.dy[0], -0.7);
  EXPECT_DOUBLE_EQ(d.dlambda[0], 0.3);
}

TEST(Rhs, ScalesLinearlyWithTau) {
  fixtures::Generator gen(41);
  for (int trial = 0; trial < 20; ++trial) {
    const Problem P = gen.problem();
    const State s{gen.point_in(P.Omega()), gen.gaussian(P.p()), 0.0};
    const Drift one = rhs(P, s, 1.0);
    const Drift two = rhs(P, s, 2.0);
    EXPECT_LE((two.dy - 2.0 * one.dy).norm(), 1e-12 * (1.0 + one.dy.norm()));
    EXPECT_LE((two.dlambda - 2.0 * one.dlambda).norm(), 1e-12 * (1.0 + one.dlambda.norm()));
  }
}

TEST(Rhs, VanishesAtEquilibrium) {
  const Problem P = fixtures::one_dim_problem();
  EXPECT_EQ(rhs(P, State{v1(0.0), v1(0.0), 0.0}, 3.0).norm(), 0.0);
  // At the kink only the y component is stationary; lambda still moves.
  const Problem K = kinked_scalar_problem();
  EXPECT_EQ(rhs(K, State{v1(0.2), v1(0.3), 0.0}, 1.0).dy[0], 0.0);
}

TEST(Integrate, StopsImmediatelyAtEquilibrium) {
  const Problem P = fixtures::one_dim_problem();
  const Trajectory traj = integrate(P, State{v1(0.0), v1(0.0), 0.0}, IntegratorConfig{});
  EXPECT_EQ(traj.terminated_by, Termination::StopTol);
  EXPECT_EQ(traj.steps, 0u);
  ASSERT_EQ(traj.samples.size(), 1u);
}

TEST(Integrate, ScalarConvergence) {
  const Problem P = fixtures::one_dim_problem();
  for (Method method : {Method::ProjectedEuler, Method::TangentRK4}) {
    IntegratorConfig cfg;
    cfg.method = method;
    const Trajectory traj = integrate(P, State{v1(0.9), v1(-2.0), 0.0}, cfg);
    EXPECT_EQ(traj.terminated_by, Termination::StopTol);
    const Sample& last = traj.back();
    const Vector x = solve_inner(P, last.lambda).x_star;
    EXPECT_LE(kkt_residual(P, x, last.y, last.lambda).total, 1e-6);
  }
}

TEST(Integrate, RecordsEveryKthStepAndFinalState) {
  const Problem P = fixtures::one_dim_problem();
  IntegratorConfig cfg;
  cfg.t_end = 1.0;
  cfg.stop_tol = 0.0;
  cfg.record_every = 100;
  const Trajectory traj = integrate(P, State{v1(0.5), v1(0.5), 0.0}, cfg);
  EXPECT_EQ(traj.terminated_by, Termination::TimeLimit);
  EXPECT_EQ(traj.steps, 1000u);
  ASSERT_EQ(traj.samples.size(), 11u);
  EXPECT_NEAR(traj.back().t, 1.0, 1e-12);
  EXPECT_NEAR(traj.samples[1].t, 0.1, 1e-12);
}

TEST(Integrate, OmegaIsInvariantOnRandomInstances) {
  fixtures::Generator gen(42);
  for (int trial = 0; trial < 20; ++trial) {
    const Problem P = gen.problem();
    for (Method method : {Method::ProjectedEuler, Method::TangentRK4}) {
      IntegratorConfig cfg;
      cfg.method = method;
      cfg.dt = 1e-2;
      cfg.t_end = 20.0;
      const Trajectory traj = integrate(P, State{gen.point_in(P.Omega()), 3.0 * gen.gaussian(P.p()), 0.0}, cfg);
      for (const auto& s : traj.samples) ASSERT_TRUE(P.Omega().contains(s.y, 1e-9));
    }
  }
}

TEST(Integrate, MultiplierStaysWithinBound) {
  fixtures::Generator gen(43);
  for (int trial = 0; trial < 20; ++trial) {
    const Problem P = gen.problem();
    const State s0{gen.point_in(P.Omega()), 2.0 * gen.gaussian(P.p()), 0.0};
    IntegratorConfig cfg;
    cfg.dt = 1e-2;
    cfg.t_end = 30.0;
    const double bound = lambda_norm_bound(P, s0.lambda);
    const Trajectory traj = integrate(P, s0, cfg);
    for (const auto& s : traj.samples) ASSERT_LE(s.lambda.norm(), bound * (1 + 1e-9));
  }
}

TEST(Integrate, EulerAndRk4AgreeOnSmoothInteriorPath) {
  const Problem P = fixtures::one_dim_problem();
  IntegratorConfig cfg;
  cfg.t_end = 10.0;
  cfg.stop_tol = 0.0;
  const State s0{v1(0.3), v1(0.2), 0.0};
  const Trajectory euler = integrate(P, s0, cfg);
  cfg.method = Method::TangentRK4;
  const Trajectory rk4 = integrate(P, s0, cfg);
  ASSERT_EQ(euler.samples.size(), rk4.samples.size());
  for (std::size_t k = 0; k < euler.samples.size(); ++k) {
    EXPECT_LE(std::abs(euler.samples[k].y[0] - rk4.samples[k].y[0]), 10 * cfg.dt);
    EXPECT_LE(std::abs(euler.samples[k].lambda[0] - rk4.samples[k].lambda[0]), 10 * cfg.dt);
  }
  // Closed form: (y, lambda) rotates and decays like exp(-t).
  const double t = rk4.back().t;
  const double y_exact = std::exp(-t) * (0.3 * std::cos(t) - 0.2 * std::sin(t));
  EXPECT_NEAR(rk4.back().y[0], y_exact, 1e-10);
}

TEST(Integrate, ResidesAtFeederEquilibrium) {
  const Problem P = casestudy::build_case();
  const Equilibrium eq = equilibrium_oracle(P);
  IntegratorConfig cfg;
  cfg.stop_tol = 0.0;
  cfg.t_end = 1.0;
  const Trajectory traj = integrate(P, State{eq.y, eq.lambda, 0.0}, cfg);
  EXPECT_EQ(traj.steps, 1000u);
  for (const auto& s : traj.samples) EXPECT_LT(distance_to(eq, s.y, s.lambda), 1e-9);
}

TEST(Integrate, SlidesAlongKink) {
  // Starting at the kink with lambda = 0.3: y must stay on the kink while lambda
  // still moves, never chattering off it.
  const Problem P = kinked_scalar_problem();
  IntegratorConfig cfg;
  cfg.t_end = 0.05;
  cfg.stop_tol = 0.0;
  const Trajectory traj = integrate(P, State{v1(0.2), v1(0.3), 0.0}, cfg);
  for (const auto& s : traj.samples) {
    const Interval clarke = P.h()[0].clarke_interval(0.2);
    if (clarke.contains(s.lambda[0])) {
      EXPECT_EQ(s.y[0], 0.2) << "t = " << s.t;
    }
  }
}

TEST(Integrate, Errors) {
  const Problem P = fixtures::one_dim_problem();
  expect_code(ErrorCode::InitialPointOutsideOmega,
              [&] { integrate(P, State{v1(1.5), v1(0.0), 0.0}, IntegratorConfig{}); });
  IntegratorConfig bad;
  bad.dt = 0.0;
  expect_code(ErrorCode::InvalidConfig, [&] { integrate(P, State{v1(0.0), v1(1.0), 0.0}, bad); });
  bad = IntegratorConfig{};
  bad.record_every = 0;
  expect_code(ErrorCode::InvalidConfig, [&] { integrate(P, State{v1(0.0), v1(1.0), 0.0}, bad); });
  expect_code(ErrorCode::NonFiniteState,
              [&] { integrate(P, State{v1(0.0), v1(std::nan("")), 0.0}, IntegratorConfig{}); });

  IntegratorConfig huge;
  huge.dt = 1000.0;
  huge.t_end = 1e7;
  expect_code(ErrorCode::NonFiniteState, [&] { integrate(P, State{v1(0.5), v1(1.0), 0.0}, huge); });
}

TEST(Integrate, WarnsOnLargeStep) {
  const Problem P = fixtures::one_dim_problem();
  IntegratorConfig cfg;
  cfg.dt = 0.5;
  cfg.t_end = 1.0;
  EXPECT_FALSE(integrate(P, State{v1(0.5), v1(1.0), 0.0}, cfg).warnings.empty());
  cfg.dt = 1e-3;
  EXPECT_TRUE(integrate(P, State{v1(0.5), v1(1.0), 0.0}, cfg).warnings.empty());
}
