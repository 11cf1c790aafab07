#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "ppdgd/errors.hpp"
#include "ppdgd/geometry.hpp"
#include "ppdgd/inner_solver.hpp"
#include "ppdgd/problem.hpp"

namespace ppdgd {

struct State {
  Vector y;
  Vector lambda;
  double t = 0.0;
};

enum class Method { ProjectedEuler, TangentRK4 };

inline std::string_view to_string(Method m) {
  return m == Method::ProjectedEuler ? "euler" : "rk4";
}

struct IntegratorConfig {
  Method method = Method::ProjectedEuler;
  double dt = 1e-3;
  double tau = 1.0;
  double t_end = 100.0;
  double stop_tol = 1e-8;
  std::size_t record_every = 1;
};

enum class Termination { TimeLimit, StopTol };

inline std::string_view to_string(Termination t) {
  return t == Termination::TimeLimit ? "TimeLimit" : "StopTol";
}

struct Sample {
  double t = 0.0;
  Vector y;
  Vector lambda;
  double drift_norm = 0.0;  // ||(dy, dlambda)|| / tau
};

struct Trajectory {
  std::vector<Sample> samples;
  IntegratorConfig config;
  Termination terminated_by = Termination::TimeLimit;
  std::size_t steps = 0;
  std::vector<std::string> warnings;

  const Sample& front() const { return samples.front(); }
  const Sample& back() const { return samples.back(); }
};

struct Drift {
  Vector dy;
  Vector dlambda;

  double norm() const { return std::sqrt(dy.squaredNorm() + dlambda.squaredNorm()); }
};

namespace detail {

inline Vector select_subgradient_given(const Problem& P, const Vector& y, const Vector& bt_lambda) {
  Vector g(y.size());
  for (Eigen::Index j = 0; j < y.size(); ++j) {
    const Interval clarke = P.h()[static_cast<std::size_t>(j)].clarke_interval(y[j]);
    g[j] = clarke.clamp(-bt_lambda[j]);
  }
  return g;
}

inline Drift drift_given(const Problem& P, const Vector& y, const Vector& bt_lambda,
                         const Vector& grad_phi, double tau) {
  const Vector g = select_subgradient_given(P, y, bt_lambda);
  Drift d;
  d.dy = tau * tangent_project(y, -g - bt_lambda, P.Omega());
  d.dlambda = tau * (grad_phi + P.B() * y - P.C());
  return d;
}

/// Crude Lipschitz bound of the unscaled field, used only for the step-size warning.
inline double drift_lipschitz_bound(const Problem& P) {
  double curvature = 0.0;
  for (const auto& hj : P.h()) {
    for (const auto& piece : hj.pieces()) curvature = std::max(curvature, 2.0 * piece.p);
  }
  const double a_norm = P.A().operatorNorm();
  const double b_norm = P.B().operatorNorm();
  return std::max(curvature, a_norm * a_norm / P.alpha()) + b_norm;
}

}  // namespace detail

/// Minimal-norm selection: g_j is -(B^T lambda)_j clamped into the Clarke
/// interval of h_j at y_j, so -g - B^T lambda is as short as possible.
inline Vector select_subgradient(const Problem& P, const Vector& y, const Vector& lambda) {
  if (y.size() != P.m() || lambda.size() != P.p()) {
    throw Error(ErrorCode::DimensionMismatch, "state dimensions do not match the problem");
  }
  return detail::select_subgradient_given(P, y, P.B().transpose() * lambda);
}

/// tau-scaled right-hand side of the projected partial primal-dual dynamics.
inline Drift rhs(const Problem& P, const State& s, double tau) {
  if (s.y.size() != P.m() || s.lambda.size() != P.p()) {
    throw Error(ErrorCode::DimensionMismatch, "state dimensions do not match the problem");
  }
  const InnerSolution inner = solve_inner(P, s.lambda);
  return detail::drift_given(P, s.y, P.B().transpose() * s.lambda, inner.grad_phi, tau);
}

/// Integrates the dynamics from s0 with a fixed step.
///
/// ProjectedEuler is a forward-backward step: lambda moves explicitly along
/// grad phi + B y - C, and y takes the resolvent of dh + N_Omega at
/// y - dt tau B^T lambda. The resolvent lands exactly on a kink whenever the
/// kink is stationary for the frozen multiplier, which reproduces sliding
/// modes without chattering. TangentRK4 is the classical four-stage scheme on
/// rhs; stage points and the result are re-projected onto Omega.
inline Trajectory integrate(const Problem& P, const State& s0, const IntegratorConfig& cfg) {
  if (!(cfg.dt > 0.0) || !(cfg.tau > 0.0) || !(cfg.t_end > 0.0) || !(cfg.stop_tol >= 0.0) ||
      cfg.record_every == 0) {
    throw Error(ErrorCode::InvalidConfig, "dt, tau, t_end must be positive and record_every >= 1");
  }
  if (s0.y.size() != P.m() || s0.lambda.size() != P.p()) {
    throw Error(ErrorCode::DimensionMismatch, "initial state dimensions do not match the problem");
  }
  if (!P.Omega().contains(s0.y, kActivityTol)) {
    throw Error(ErrorCode::InitialPointOutsideOmega, "y(0) lies outside Omega");
  }
  if (!s0.lambda.allFinite()) {
    throw Error(ErrorCode::NonFiniteState, "lambda(0) is not finite");
  }

  Trajectory traj;
  traj.config = cfg;
  const double lipschitz = detail::drift_lipschitz_bound(P);
  if (cfg.dt * cfg.tau * lipschitz >= 1.0) {
    traj.warnings.push_back("dt * tau * L = " + std::to_string(cfg.dt * cfg.tau * lipschitz) +
                            " >= 1; the discrete flow may be inaccurate");
  }

  const double h = cfg.dt * cfg.tau;
  const Matrix& B = P.B();
  const BoxSet& Omega = P.Omega();

  Vector y = project_box(s0.y, Omega);
  Vector lambda = s0.lambda;
  std::size_t step = 0;
  auto time_at = [&](std::size_t k) { return s0.t + static_cast<double>(k) * cfg.dt; };

  auto record = [&](double drift_norm) {
    traj.samples.push_back(Sample{time_at(step), y, lambda, drift_norm});
  };

  auto stage_drift = [&](const Vector& ys, const Vector& ls) {
    const Vector yp = project_box(ys, Omega);
    const InnerSolution inner = solve_inner(P, ls);
    return detail::drift_given(P, yp, B.transpose() * ls, inner.grad_phi, 1.0);
  };

  while (true) {
    const Vector bt_lambda = B.transpose() * lambda;
    const InnerSolution inner = solve_inner(P, lambda);
    const Drift drift = detail::drift_given(P, y, bt_lambda, inner.grad_phi, 1.0);
    const double drift_norm = drift.norm();

    const bool stop = drift_norm <= cfg.stop_tol;
    const bool out_of_time = time_at(step) >= s0.t + cfg.t_end - 0.5 * cfg.dt;
    if (stop || out_of_time) {
      record(drift_norm);
      traj.terminated_by = stop ? Termination::StopTol : Termination::TimeLimit;
      break;
    }
    if (step % cfg.record_every == 0) record(drift_norm);

    if (cfg.method == Method::ProjectedEuler) {
      Vector y_next(y.size());
      for (Eigen::Index j = 0; j < y.size(); ++j) {
        y_next[j] = P.h()[static_cast<std::size_t>(j)].prox(y[j] - h * bt_lambda[j], h,
                                                            Omega.bounds(j));
      }
      lambda += drift.dlambda * h;
      y = std::move(y_next);
    } else {
      const Drift& k1 = drift;
      const Drift k2 = stage_drift(y + 0.5 * h * k1.dy, lambda + 0.5 * h * k1.dlambda);
      const Drift k3 = stage_drift(y + 0.5 * h * k2.dy, lambda + 0.5 * h * k2.dlambda);
      const Drift k4 = stage_drift(y + h * k3.dy, lambda + h * k3.dlambda);
      y = project_box(y + (h / 6.0) * (k1.dy + 2.0 * k2.dy + 2.0 * k3.dy + k4.dy), Omega);
      lambda += (h / 6.0) * (k1.dlambda + 2.0 * k2.dlambda + 2.0 * k3.dlambda + k4.dlambda);
    }
    ++step;
    if (!y.allFinite() || !lambda.allFinite()) {
      throw Error(ErrorCode::NonFiniteState,
                  "state became non-finite at t = " + std::to_string(time_at(step)) +
                      "; reduce dt");
    }
  }
  traj.steps = step;
  return traj;
}

}  // namespace ppdgd
