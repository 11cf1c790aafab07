#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "ppdgd/errors.hpp"
#include "ppdgd/objectives.hpp"

namespace ppdgd {

/// min f(x) + sum_j h_j(y_j)  s.t.  A x + B y = C,  x in X,  y in Omega.
///
/// Immutable once built. Holds the constants every other module relies on:
///   alpha, alpha_m  extreme eigenvalues of H
///   beta            smallest curvature over all pieces of h
///   kappa1          smallest eigenvalue of A A^T
///   gamma           min{2 beta, 2 kappa1 / alpha_m}
class Problem {
 public:
  const QuadraticSmoothFn& f() const { return f_; }
  const std::vector<PiecewiseScalarFn>& h() const { return h_; }
  const Matrix& A() const { return A_; }
  const Matrix& B() const { return B_; }
  const Vector& C() const { return C_; }
  const BoxSet& X() const { return X_; }
  const BoxSet& Omega() const { return Omega_; }

  Eigen::Index n() const { return A_.cols(); }
  Eigen::Index m() const { return B_.cols(); }
  Eigen::Index p() const { return A_.rows(); }

  double alpha() const { return alpha_; }
  double alpha_m() const { return alpha_m_; }
  double beta() const { return beta_; }
  double kappa1() const { return kappa1_; }
  double gamma() const { return gamma_; }

  bool hessian_is_diagonal() const { return hessian_diagonal_; }
  const Eigen::LLT<Matrix>& hessian_factor() const { return hessian_factor_; }

  double h_value(const Vector& y) const {
    double total = 0.0;
    for (Eigen::Index j = 0; j < y.size(); ++j) total += h_[static_cast<std::size_t>(j)].value(y[j]);
    return total;
  }

  double objective(const Vector& x, const Vector& y) const { return f_.value(x) + h_value(y); }

  friend Problem build_problem(QuadraticSmoothFn f, std::vector<PiecewiseScalarFn> h, Matrix A,
                               Matrix B, Vector C, BoxSet X, BoxSet Omega);

 private:
  Problem(QuadraticSmoothFn f, std::vector<PiecewiseScalarFn> h, Matrix A, Matrix B, Vector C,
          BoxSet X, BoxSet Omega)
      : f_(std::move(f)),
        h_(std::move(h)),
        A_(std::move(A)),
        B_(std::move(B)),
        C_(std::move(C)),
        X_(std::move(X)),
        Omega_(std::move(Omega)) {}

  QuadraticSmoothFn f_;
  std::vector<PiecewiseScalarFn> h_;
  Matrix A_;
  Matrix B_;
  Vector C_;
  BoxSet X_;
  BoxSet Omega_;

  double alpha_ = 0.0;
  double alpha_m_ = 0.0;
  double beta_ = 0.0;
  double kappa1_ = 0.0;
  double gamma_ = 0.0;
  bool hessian_diagonal_ = false;
  Eigen::LLT<Matrix> hessian_factor_;
};

namespace detail {

inline std::string shape(const Matrix& M) {
  return std::to_string(M.rows()) + "x" + std::to_string(M.cols());
}

}  // namespace detail

/// Validates dimensions and Assumptions 2-4, then computes the derived
/// constants by dense symmetric eigendecomposition.
inline Problem build_problem(QuadraticSmoothFn f, std::vector<PiecewiseScalarFn> h, Matrix A,
                             Matrix B, Vector C, BoxSet X, BoxSet Omega) {
  const Eigen::Index n = A.cols();
  const Eigen::Index m = B.cols();
  const Eigen::Index p = A.rows();

  if (p == 0 || n == 0 || m == 0) {
    throw Error(ErrorCode::DimensionMismatch, "n, m and p must all be positive");
  }
  if (B.rows() != p || C.size() != p) {
    throw Error(ErrorCode::DimensionMismatch, "A is " + detail::shape(A) + ", B is " +
                                                  detail::shape(B) + ", C has " +
                                                  std::to_string(C.size()) + " entries");
  }
  if (f.H.rows() != n || f.H.cols() != n || f.c.size() != n) {
    throw Error(ErrorCode::DimensionMismatch,
                "H is " + detail::shape(f.H) + " and c has " + std::to_string(f.c.size()) +
                    " entries; expected n = " + std::to_string(n));
  }
  if (static_cast<Eigen::Index>(h.size()) != m) {
    throw Error(ErrorCode::DimensionMismatch,
                "h has " + std::to_string(h.size()) + " components; expected m = " + std::to_string(m));
  }
  if (static_cast<Eigen::Index>(X.dim()) != n) {
    throw Error(ErrorCode::DimensionMismatch, "X has dimension " + std::to_string(X.dim()));
  }
  if (static_cast<Eigen::Index>(Omega.dim()) != m) {
    throw Error(ErrorCode::DimensionMismatch, "Omega has dimension " + std::to_string(Omega.dim()));
  }
  if (Omega.is_free()) {
    throw Error(ErrorCode::NonCompactOmega, "Omega must be a box");
  }
  if (!f.H.allFinite() || !f.c.allFinite() || !A.allFinite() || !B.allFinite() || !C.allFinite()) {
    throw Error(ErrorCode::InvalidFunction, "problem data contains non-finite entries");
  }

  const double h_scale = std::max(1.0, f.H.cwiseAbs().maxCoeff());
  if ((f.H - f.H.transpose()).cwiseAbs().maxCoeff() > 1e-12 * h_scale) {
    throw Error(ErrorCode::InvalidFunction, "H is not symmetric");
  }

  Problem P(std::move(f), std::move(h), std::move(A), std::move(B), std::move(C), std::move(X),
            std::move(Omega));

  Eigen::SelfAdjointEigenSolver<Matrix> h_eig(P.f_.H, Eigen::EigenvaluesOnly);
  P.alpha_ = h_eig.eigenvalues().minCoeff();
  P.alpha_m_ = h_eig.eigenvalues().maxCoeff();
  if (!(P.alpha_ > 0.0)) {
    throw Error(ErrorCode::NotStronglyConvex,
                "H is not positive definite (smallest eigenvalue " + std::to_string(P.alpha_) + ")");
  }

  P.beta_ = std::numeric_limits<double>::infinity();
  for (const auto& hj : P.h_) P.beta_ = std::min(P.beta_, hj.strong_convexity());

  const Matrix AAt = P.A_ * P.A_.transpose();
  Eigen::SelfAdjointEigenSolver<Matrix> a_eig(AAt, Eigen::EigenvaluesOnly);
  const double kappa_min = a_eig.eigenvalues().minCoeff();
  const double kappa_max = a_eig.eigenvalues().maxCoeff();
  if (p > n || !(kappa_min > 1e-10 * kappa_max)) {
    throw Error(ErrorCode::RankDeficient, "A does not have full row rank (lambda_min(AA^T) = " +
                                              std::to_string(kappa_min) + ")");
  }
  P.kappa1_ = kappa_min;
  P.gamma_ = std::min(2.0 * P.beta_, 2.0 * P.kappa1_ / P.alpha_m_);

  P.hessian_diagonal_ = P.f_.H.isDiagonal(0.0);
  P.hessian_factor_.compute(P.f_.H);
  if (P.hessian_factor_.info() != Eigen::Success) {
    throw Error(ErrorCode::NotStronglyConvex, "Cholesky factorization of H failed");
  }
  return P;
}

/// Clarke interval of h_j at s.
inline Interval clarke_interval(const PiecewiseScalarFn& hj, double s) { return hj.clarke_interval(s); }

/// Checks Slater's condition for the box-constrained affine system: some x in
/// the relative interior of X and y in the relative interior of Omega satisfy
/// A x + B y = C. Returns the smallest residual norm found.
///
/// With X free and A of full row rank the condition holds trivially and 0 is
/// returned without iterating.
inline double slater_residual(const Problem& P) {
  if (P.X().is_free()) return 0.0;

  const Eigen::Index n = P.n();
  const Eigen::Index m = P.m();
  Matrix M(P.p(), n + m);
  M << P.A(), P.B();

  // Shrink each box slightly toward its centre to stay in the relative interior.
  Vector lo(n + m), hi(n + m);
  lo << P.X().lo(), P.Omega().lo();
  hi << P.X().hi(), P.Omega().hi();
  const Vector mid = 0.5 * (lo + hi);
  const Vector lo_in = mid + (1.0 - 1e-6) * (lo - mid);
  const Vector hi_in = mid + (1.0 - 1e-6) * (hi - mid);

  Eigen::SelfAdjointEigenSolver<Matrix> eig(M.transpose() * M, Eigen::EigenvaluesOnly);
  const double lip = std::max(eig.eigenvalues().maxCoeff(), 1e-12);

  // Accelerated projected gradient on 1/2 ||M z - C||^2.
  Vector z = mid.cwiseMax(lo_in).cwiseMin(hi_in);
  Vector z_prev = z;
  double t = 1.0;
  for (int it = 0; it < 20000; ++it) {
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    const Vector w = z + ((t - 1.0) / t_next) * (z - z_prev);
    const Vector grad = M.transpose() * (M * w - P.C());
    z_prev = z;
    z = (w - grad / lip).cwiseMax(lo_in).cwiseMin(hi_in);
    t = t_next;
    if ((M * z - P.C()).norm() <= 1e-12) break;
  }
  return (M * z - P.C()).norm();
}

}  // namespace ppdgd
