#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ppdgd/dynamics.hpp"
#include "ppdgd/errors.hpp"
#include "ppdgd/geometry.hpp"
#include "ppdgd/problem.hpp"

namespace ppdgd {

struct KktResidual {
  double r_x = 0.0;
  double r_y = 0.0;
  double r_eq = 0.0;
  double total = 0.0;
};

/// Primal-dual triple (x*, y*, lambda*).
struct Equilibrium {
  Vector x;
  Vector y;
  Vector lambda;
};

struct ConvergenceReport {
  Equilibrium equilibrium;
  double gamma_bound = 0.0;
  double tau = 1.0;
  bool envelope_ok = false;
  double envelope_margin = 0.0;
  double fitted_rate = std::numeric_limits<double>::quiet_NaN();  // NaN: not applicable
  KktResidual kkt;

  /// Decay exponent of the certified distance envelope, gamma * tau / 2.
  double envelope_exponent() const { return 0.5 * gamma_bound * tau; }
  bool fitted_rate_applicable() const { return !std::isnan(fitted_rate); }
};

/// Residuals of the optimality system
///   0 in grad f(x) + A^T lambda + N_X(x)
///   0 in dh(y) + B^T lambda + N_Omega(y)
///   0 = A x + B y - C
/// each measured as a componentwise max distance (infinity norm).
inline KktResidual kkt_residual(const Problem& P, const Vector& x, const Vector& y,
                                const Vector& lambda) {
  if (x.size() != P.n() || y.size() != P.m() || lambda.size() != P.p()) {
    throw Error(ErrorCode::DimensionMismatch, "KKT point dimensions do not match the problem");
  }
  if (!P.X().contains(x, kActivityTol)) {
    throw Error(ErrorCode::PointOutsideSet, "x lies outside X");
  }
  if (!P.Omega().contains(y, kActivityTol)) {
    throw Error(ErrorCode::PointOutsideSet, "y lies outside Omega");
  }

  KktResidual r;
  const Vector stat_x = P.f().gradient(x) + P.A().transpose() * lambda;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    r.r_x = std::max(r.r_x, normal_cone_interval(P.X(), j, x[j]).distance(-stat_x[j]));
  }
  const Vector bt_lambda = P.B().transpose() * lambda;
  for (Eigen::Index j = 0; j < y.size(); ++j) {
    const Interval clarke = P.h()[static_cast<std::size_t>(j)].clarke_interval(y[j]);
    const Interval normal = normal_cone_interval(P.Omega(), j, y[j]);
    const Interval sum{clarke.lo + normal.lo, clarke.hi + normal.hi};
    r.r_y = std::max(r.r_y, sum.distance(-bt_lambda[j]));
  }
  r.r_eq = (P.A() * x + P.B() * y - P.C()).lpNorm<Eigen::Infinity>();
  r.total = std::max({r.r_x, r.r_y, r.r_eq});
  return r;
}

inline double lyapunov_value(const Equilibrium& eq, const Vector& y, const Vector& lambda) {
  if (y.size() != eq.y.size() || lambda.size() != eq.lambda.size()) {
    throw Error(ErrorCode::DimensionMismatch, "state dimensions do not match the equilibrium");
  }
  return 0.5 * (y - eq.y).squaredNorm() + 0.5 * (lambda - eq.lambda).squaredNorm();
}

/// Distance ||(y - y*, lambda - lambda*)||.
inline double distance_to(const Equilibrium& eq, const Vector& y, const Vector& lambda) {
  return std::sqrt(2.0 * lyapunov_value(eq, y, lambda));
}

struct OracleOptions {
  double initial_penalty = 1.0;
  double penalty_growth = 10.0;
  int stages = 8;
  double inner_tolerance = 1e-10;
  std::size_t max_inner_iterations = 400000;
  double feasibility_tolerance = 1e-12;
  double acceptance = 1e-6;
};

namespace detail {

/// argmin_{s in range} g(s) + (s - v)^2 / (2 step) by comparing every
/// candidate's objective value. Kept separate from PiecewiseScalarFn::prox so
/// the oracle does not share the integrator's resolvent.
inline double oracle_prox(const PiecewiseScalarFn& g, double v, double step, Interval range) {
  std::vector<double> candidates;
  const auto& bps = g.breakpoints();
  const auto& pieces = g.pieces();
  for (std::size_t k = 0; k < pieces.size(); ++k) {
    const double lo = k == 0 ? -std::numeric_limits<double>::infinity() : bps[k - 1];
    const double hi = k == bps.size() ? std::numeric_limits<double>::infinity() : bps[k];
    // Minimizer of the k-th quadratic restricted to its own closed piece.
    const double s = (v / step - pieces[k].q) / (2.0 * pieces[k].p + 1.0 / step);
    candidates.push_back(std::min(hi, std::max(lo, s)));
  }
  double best = 0.0;
  double best_obj = std::numeric_limits<double>::infinity();
  for (double s : candidates) {
    s = range.clamp(s);
    const double obj = g.value(s) + (s - v) * (s - v) / (2.0 * step);
    if (obj < best_obj) {
      best_obj = obj;
      best = s;
    }
  }
  return best;
}

/// Least-squares multiplier from the stationarity rows that must hold with
/// equality (interior x coordinates, interior smooth y coordinates). Returns
/// false if those rows do not determine lambda.
inline bool stationarity_multiplier(const Problem& P, const Vector& x, const Vector& y,
                                    Vector& lambda) {
  const Vector grad_f = P.f().gradient(x);
  std::vector<Eigen::Index> x_rows;
  std::vector<Eigen::Index> y_rows;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const Interval nc = normal_cone_interval(P.X(), j, x[j]);
    if (nc.lo == 0.0 && nc.hi == 0.0) x_rows.push_back(j);
  }
  for (Eigen::Index j = 0; j < y.size(); ++j) {
    const Interval nc = normal_cone_interval(P.Omega(), j, y[j]);
    const Interval cl = P.h()[static_cast<std::size_t>(j)].clarke_interval(y[j]);
    if (nc.lo == 0.0 && nc.hi == 0.0 && cl.lo == cl.hi) y_rows.push_back(j);
  }
  const auto rows = static_cast<Eigen::Index>(x_rows.size() + y_rows.size());
  if (rows < P.p()) return false;
  Matrix M(rows, P.p());
  Vector rhs(rows);
  Eigen::Index r = 0;
  for (auto j : x_rows) {
    M.row(r) = P.A().col(j).transpose();
    rhs[r++] = -grad_f[j];
  }
  for (auto j : y_rows) {
    M.row(r) = P.B().col(j).transpose();
    rhs[r++] = -P.h()[static_cast<std::size_t>(j)].clarke_interval(y[j]).lo;
  }
  Eigen::ColPivHouseholderQR<Matrix> qr(M);
  qr.setThreshold(1e-10);
  if (qr.rank() < P.p()) return false;
  lambda = qr.solve(rhs);
  return lambda.allFinite();
}

}  // namespace detail

/// Primal-dual solution computed without touching the dynamics.
///
/// Minimizes f(x) + h(y) over X x Omega with an augmented quadratic penalty on
/// A x + B y = C. Each stage runs accelerated proximal gradient (exact 1-d
/// proximal maps of h_j on Omega, adaptive restart) to a gradient-mapping
/// tolerance, updates the multiplier estimate, and grows the penalty tenfold.
/// lambda is then recovered from the stationarity rows by least squares,
/// falling back to the penalty multiplier when those rows are rank deficient
/// or fit worse.
inline Equilibrium equilibrium_oracle(const Problem& P, const OracleOptions& opts = {}) {
  const Eigen::Index n = P.n();
  const Eigen::Index m = P.m();
  Matrix M(P.p(), n + m);
  M << P.A(), P.B();
  const Matrix MtM = M.transpose() * M;
  const Vector MtC = M.transpose() * P.C();

  Vector z(n + m);
  z.head(n) = project_box(Vector::Zero(n), P.X());
  z.tail(m) = project_box(Vector::Zero(m), P.Omega());
  Vector mu = Vector::Zero(P.p());

  auto prox = [&](const Vector& v, double step) {
    Vector out(n + m);
    out.head(n) = project_box(v.head(n), P.X());
    for (Eigen::Index j = 0; j < m; ++j) {
      out[n + j] = detail::oracle_prox(P.h()[static_cast<std::size_t>(j)], v[n + j], step,
                                       P.Omega().bounds(j));
    }
    return out;
  };

  double rho = opts.initial_penalty;
  for (int stage = 0; stage < opts.stages; ++stage, rho *= opts.penalty_growth) {
    Matrix Q = rho * MtM;
    Q.topLeftCorner(n, n) += P.f().H;
    Vector lin(n + m);
    lin.setZero();
    lin.head(n) = P.f().c;
    lin += M.transpose() * mu - rho * MtC;
    Eigen::SelfAdjointEigenSolver<Matrix> eig(Q, Eigen::EigenvaluesOnly);
    const double lip = std::max(eig.eigenvalues().maxCoeff(), 1e-12);
    const double step = 1.0 / lip;

    Vector z_prev = z;
    Vector w = z;
    double t = 1.0;
    bool converged = false;
    for (std::size_t it = 0; it < opts.max_inner_iterations; ++it) {
      const Vector grad = Q * w + lin;
      const Vector z_next = prox(w - step * grad, step);
      const double gmap = (w - z_next).norm() * lip;
      // Restart momentum when it points uphill.
      if ((w - z_next).dot(z_next - z) > 0.0) {
        t = 1.0;
      }
      const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
      z_prev = z;
      z = z_next;
      w = z + ((t - 1.0) / t_next) * (z - z_prev);
      t = t_next;
      if (gmap <= opts.inner_tolerance) {
        converged = true;
        break;
      }
    }
    const Vector violation = M * z - P.C();
    mu += rho * violation;
    if (converged && violation.lpNorm<Eigen::Infinity>() <= opts.feasibility_tolerance) break;
  }

  Equilibrium eq;
  eq.x = z.head(n);
  eq.y = z.tail(m);
  eq.lambda = mu;
  double best = kkt_residual(P, eq.x, eq.y, eq.lambda).total;
  Vector lambda_ls;
  if (detail::stationarity_multiplier(P, eq.x, eq.y, lambda_ls)) {
    const double ls = kkt_residual(P, eq.x, eq.y, lambda_ls).total;
    if (ls <= best) {
      best = ls;
      eq.lambda = lambda_ls;
    }
  }
  if (!(best <= opts.acceptance)) {
    throw Error(ErrorCode::OracleFailed, "KKT residual " + std::to_string(best) +
                                             " exceeds " + std::to_string(opts.acceptance));
  }
  return eq;
}

struct CertifyOptions {
  double equilibrium_tolerance = 1e-6;
  double envelope_slack = 1e-6;
  double fit_floor = 1e-10;
};

/// Checks every sample against sqrt(2 V(0)) exp(-gamma tau t / 2) (1 + slack)
/// and fits the observed decay rate.
inline ConvergenceReport certify_envelope(const Problem& P, const Trajectory& traj,
                                          const Equilibrium& eq, const CertifyOptions& opts = {}) {
  if (traj.samples.empty()) {
    throw Error(ErrorCode::InvalidConfig, "trajectory has no samples");
  }
  ConvergenceReport report;
  report.equilibrium = eq;
  report.kkt = kkt_residual(P, eq.x, eq.y, eq.lambda);
  if (!(report.kkt.total <= opts.equilibrium_tolerance)) {
    throw Error(ErrorCode::EquilibriumUnverified,
                "equilibrium KKT residual " + std::to_string(report.kkt.total));
  }
  report.gamma_bound = P.gamma();
  report.tau = traj.config.tau;

  const double t0 = traj.samples.front().t;
  const double d0 = distance_to(eq, traj.samples.front().y, traj.samples.front().lambda);
  const double exponent = report.envelope_exponent();

  report.envelope_ok = true;
  report.envelope_margin = std::numeric_limits<double>::infinity();
  double st = 0.0, sl = 0.0, stt = 0.0, stl = 0.0;
  std::size_t count = 0;
  for (const auto& s : traj.samples) {
    const double elapsed = s.t - t0;
    const double dist = distance_to(eq, s.y, s.lambda);
    const double bound = d0 * std::exp(-exponent * elapsed) * (1.0 + opts.envelope_slack);
    report.envelope_margin = std::min(report.envelope_margin, bound - dist);
    if (dist > bound) report.envelope_ok = false;
    if (dist > opts.fit_floor) {
      const double l = std::log(dist);
      st += elapsed;
      sl += l;
      stt += elapsed * elapsed;
      stl += elapsed * l;
      ++count;
    }
  }
  if (count >= 2) {
    const double cnt = static_cast<double>(count);
    const double denom = cnt * stt - st * st;
    if (denom > 0.0) report.fitted_rate = -(cnt * stl - st * sl) / denom;
  }
  return report;
}

/// a_lambda = ||grad phi(0)|| + max_{y in Omega} ||B y - C||.
///
/// The maximum of a convex function over a box is attained at a vertex; all
/// vertices are enumerated for m <= 20, beyond that a triangle-inequality
/// upper bound is returned.
inline double lambda_growth_constant(const Problem& P) {
  const Vector grad0 = solve_inner(P, Vector::Zero(P.p())).grad_phi;
  const Eigen::Index m = P.m();
  const Vector& lo = P.Omega().lo();
  const Vector& hi = P.Omega().hi();
  double worst = 0.0;
  if (m <= 20) {
    const std::size_t count = std::size_t{1} << m;
    Vector y(m);
    for (std::size_t mask = 0; mask < count; ++mask) {
      for (Eigen::Index j = 0; j < m; ++j) y[j] = (mask >> j) & 1U ? hi[j] : lo[j];
      worst = std::max(worst, (P.B() * y - P.C()).norm());
    }
  } else {
    const Vector mid = 0.5 * (lo + hi);
    worst = (P.B() * mid - P.C()).norm() + P.B().operatorNorm() * (0.5 * (hi - lo)).norm();
  }
  return grad0.norm() + worst;
}

/// Bound on sup_t ||lambda(t)||: max{||lambda(0)||, (alpha_m / kappa1) a_lambda}.
inline double lambda_norm_bound(const Problem& P, const Vector& lambda0) {
  return std::max(lambda0.norm(), P.alpha_m() / P.kappa1() * lambda_growth_constant(P));
}

}  // namespace ppdgd
