#pragma once

#include <cmath>
#include <cstddef>
#include <string>

#include <Eigen/Dense>

#include "ppdgd/errors.hpp"
#include "ppdgd/geometry.hpp"
#include "ppdgd/problem.hpp"

namespace ppdgd {

struct InnerSolution {
  Vector x_star;
  double phi = 0.0;
  Vector grad_phi;  // A x_star
  std::size_t iterations = 0;
  double residual = 0.0;
};

struct InnerSolverOptions {
  double tolerance = 1e-10;
  std::size_t max_iterations = 10000;
  double divergence_threshold = 1e-6;
};

namespace detail {

/// Norm of the projected-gradient map (x - P_X(x - g)) of the inner objective.
inline double inner_residual(const Problem& P, const Vector& x, const Vector& grad) {
  return (x - project_box(x - grad, P.X())).norm();
}

}  // namespace detail

/// x*(lambda) = argmin_{x in X} f(x) + lambda^T A x, with phi(lambda) and its
/// gradient A x*.
///
/// Free X is solved exactly with the Cholesky factor cached in the problem;
/// a box with diagonal H clamps the unconstrained minimizer; a box with dense
/// H runs projected gradient with step 1 / alpha_m.
inline InnerSolution solve_inner(const Problem& P, const Vector& lambda,
                                 const InnerSolverOptions& opts = {}) {
  if (lambda.size() != P.p()) {
    throw Error(ErrorCode::DimensionMismatch,
                "lambda has " + std::to_string(lambda.size()) + " entries; expected " +
                    std::to_string(P.p()));
  }
  const auto& f = P.f();
  const Vector linear = f.c + P.A().transpose() * lambda;

  InnerSolution sol;
  if (P.X().is_free()) {
    sol.x_star = P.hessian_factor().solve(-linear);
  } else if (P.hessian_is_diagonal()) {
    sol.x_star = project_box((-linear.array() / f.H.diagonal().array()).matrix(), P.X());
  } else {
    const double step = 1.0 / P.alpha_m();
    Vector x = project_box(P.hessian_factor().solve(-linear), P.X());
    Vector grad = f.H * x + linear;
    double res = detail::inner_residual(P, x, grad);
    std::size_t it = 0;
    while (res > opts.tolerance && it < opts.max_iterations) {
      x = project_box(x - step * grad, P.X());
      grad.noalias() = f.H * x;
      grad += linear;
      res = detail::inner_residual(P, x, grad);
      ++it;
    }
    if (res > opts.divergence_threshold) {
      throw Error(ErrorCode::InnerSolveDiverged,
                  "projected gradient stalled at residual " + std::to_string(res));
    }
    sol.x_star = std::move(x);
    sol.iterations = it;
  }

  const Vector grad = f.H * sol.x_star + linear;
  sol.residual = detail::inner_residual(P, sol.x_star, grad);
  sol.grad_phi = P.A() * sol.x_star;
  sol.phi = f.value(sol.x_star) + lambda.dot(sol.grad_phi);
  return sol;
}

/// <l1 - l2, grad phi(l1) - grad phi(l2)> + (kappa1 / alpha_m) ||l1 - l2||^2.
///
/// Non-positive whenever phi is (kappa1/alpha_m)-strongly concave along the
/// segment; guaranteed for free X.
inline double strong_concavity_check(const Problem& P, const Vector& lambda1, const Vector& lambda2) {
  const Vector diff = lambda1 - lambda2;
  const Vector g1 = solve_inner(P, lambda1).grad_phi;
  const Vector g2 = solve_inner(P, lambda2).grad_phi;
  return diff.dot(g1 - g2) + (P.kappa1() / P.alpha_m()) * diff.squaredNorm();
}

}  // namespace ppdgd
