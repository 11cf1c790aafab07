#pragma once

#include <cmath>
#include <cstddef>
#include <future>
#include <vector>

#include <Eigen/Dense>

#include "ppdgd/analysis.hpp"
#include "ppdgd/dynamics.hpp"
#include "ppdgd/problem.hpp"

namespace ppdgd::casestudy {

/// Linearized radial-feeder voltage regulation: choose bus voltages U and
/// reactive injections q minimizing (a/2)||U - 1||^2 + sum_j h_j(q_j) subject
/// to B_net U = q + C and q_lo <= q <= q_hi.
struct FeederSpec {
  std::size_t n_buses = 7;
  double a = 8.0;
  Vector C = (Vector(7) << 1.011, -0.009, -0.1, 0.14, -0.26, -0.019, -0.06).finished();
  Vector q_limit_kvar = (Vector(7) << 80, 80, 88, 80, 104, 80, 96).finished();
  double kvar_base = 100.0;
  double lambda_min_target = 0.1165;
  Matrix B_net;  // empty: synthesized by radial_line_matrix

  Vector q_hi() const { return q_limit_kvar / kvar_base; }
  Vector q_lo() const { return -q_hi(); }
};

/// Reduced Laplacian of a radial line feeder (substation grounded at bus 0)
/// with unit line admittances, scaled so its smallest eigenvalue equals
/// lambda_min.
inline Matrix radial_line_matrix(std::size_t buses, double lambda_min) {
  const auto n = static_cast<Eigen::Index>(buses);
  Matrix L = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    L(i, i) = i + 1 < n ? 2.0 : 1.0;
    if (i + 1 < n) {
      L(i, i + 1) = -1.0;
      L(i + 1, i) = -1.0;
    }
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(L, Eigen::EigenvaluesOnly);
  return L * (lambda_min / eig.eigenvalues().minCoeff());
}

/// Reactive-power regulation cost: 1/2 s^2 on [-0.2, 0.2], s^2 - 0.02 outside.
inline PiecewiseScalarFn regulation_cost() {
  return PiecewiseScalarFn({-0.2, 0.2}, {QuadraticPiece{1.0, 0.0, -0.02}, QuadraticPiece{0.5, 0.0, 0.0},
                                         QuadraticPiece{1.0, 0.0, -0.02}});
}

inline Matrix feeder_matrix(const FeederSpec& spec) {
  if (spec.B_net.size() != 0) return spec.B_net;
  return radial_line_matrix(spec.n_buses, spec.lambda_min_target);
}

/// Maps the feeder onto the generic form: x = U (free), y = q (box),
/// A = B_net, B = -I, C = C.
inline Problem build_case(const FeederSpec& spec = {}) {
  const auto n = static_cast<Eigen::Index>(spec.n_buses);
  if (spec.C.size() != n || spec.q_limit_kvar.size() != n) {
    throw Error(ErrorCode::DimensionMismatch, "feeder data does not match the bus count");
  }
  QuadraticSmoothFn f;
  f.H = spec.a * Matrix::Identity(n, n);
  f.c = -spec.a * Vector::Ones(n);
  f.d = 0.5 * spec.a * static_cast<double>(n);
  std::vector<PiecewiseScalarFn> h(spec.n_buses, regulation_cost());
  return build_problem(std::move(f), std::move(h), feeder_matrix(spec), -Matrix::Identity(n, n),
                       spec.C, BoxSet::free(spec.n_buses), BoxSet::box(spec.q_lo(), spec.q_hi()));
}

/// Default integration settings for the feeder runs.
inline IntegratorConfig default_config(double tau = 1.0) {
  IntegratorConfig cfg;
  cfg.method = Method::ProjectedEuler;
  cfg.dt = 1e-3;
  cfg.tau = tau;
  cfg.t_end = 200.0;
  cfg.stop_tol = 1e-8;
  cfg.record_every = 10;
  return cfg;
}

struct CaseRun {
  Trajectory trajectory;
  ConvergenceReport report;
  bool omega_invariant = false;
  KktResidual endpoint_kkt;
  double endpoint_gap = 0.0;  // ||(q, lambda)(t_end) - (q*, lambda*)||
};

/// Integrates from q(0) = 0, lambda(0) = 0 and certifies against eq.
inline CaseRun run_case(const Problem& P, const Equilibrium& eq, const IntegratorConfig& cfg) {
  if (!(cfg.tau > 0.0)) throw Error(ErrorCode::InvalidConfig, "tau must be positive");
  State s0{Vector::Zero(P.m()), Vector::Zero(P.p()), 0.0};
  CaseRun run;
  run.trajectory = integrate(P, s0, cfg);
  run.report = certify_envelope(P, run.trajectory, eq);
  run.omega_invariant = true;
  for (const auto& s : run.trajectory.samples) {
    if (!P.Omega().contains(s.y, kActivityTol)) run.omega_invariant = false;
  }
  const Sample& last = run.trajectory.back();
  const Vector x_end = solve_inner(P, last.lambda).x_star;
  run.endpoint_kkt = kkt_residual(P, x_end, last.y, last.lambda);
  run.endpoint_gap = distance_to(eq, last.y, last.lambda);
  return run;
}

/// Runs a tau sweep concurrently over the shared problem.
inline std::vector<CaseRun> run_sweep(const Problem& P, const Equilibrium& eq,
                                      const std::vector<double>& taus, const IntegratorConfig& base) {
  std::vector<std::future<CaseRun>> jobs;
  jobs.reserve(taus.size());
  for (double tau : taus) {
    IntegratorConfig cfg = base;
    cfg.tau = tau;
    jobs.push_back(std::async(std::launch::async, [&P, &eq, cfg] { return run_case(P, eq, cfg); }));
  }
  std::vector<CaseRun> runs;
  runs.reserve(jobs.size());
  for (auto& job : jobs) runs.push_back(job.get());
  return runs;
}

}  // namespace ppdgd::casestudy
