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

namespace ppdgd {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Closed interval [lo, hi] on the real line; either end may be infinite.
struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  bool contains(double v) const { return lo <= v && v <= hi; }
  double clamp(double v) const { return std::min(hi, std::max(lo, v)); }
  double distance(double v) const {
    if (v < lo) return lo - v;
    if (v > hi) return v - hi;
    return 0.0;
  }
};

/// Either all of R^dim or a compact box [lo, hi].
class BoxSet {
 public:
  enum class Kind { Free, Box };

  static BoxSet free(std::size_t dim) { return BoxSet(Kind::Free, dim, Vector(), Vector()); }

  static BoxSet box(Vector lo, Vector hi) {
    if (lo.size() != hi.size()) {
      throw Error(ErrorCode::DimensionMismatch, "box bounds have different lengths");
    }
    for (Eigen::Index j = 0; j < lo.size(); ++j) {
      if (!std::isfinite(lo[j]) || !std::isfinite(hi[j])) {
        throw Error(ErrorCode::InvalidFunction, "box bound " + std::to_string(j) + " is not finite");
      }
      if (lo[j] > hi[j]) {
        throw Error(ErrorCode::InvalidFunction, "box bound " + std::to_string(j) + " has lo > hi");
      }
    }
    const auto dim = static_cast<std::size_t>(lo.size());
    return BoxSet(Kind::Box, dim, std::move(lo), std::move(hi));
  }

  Kind kind() const { return kind_; }
  bool is_free() const { return kind_ == Kind::Free; }
  std::size_t dim() const { return dim_; }
  const Vector& lo() const { return lo_; }
  const Vector& hi() const { return hi_; }

  /// Bounds of coordinate j as an interval (infinite for Free).
  Interval bounds(Eigen::Index j) const {
    if (is_free()) {
      constexpr double inf = std::numeric_limits<double>::infinity();
      return {-inf, inf};
    }
    return {lo_[j], hi_[j]};
  }

  bool contains(const Vector& v, double tol = 0.0) const {
    if (static_cast<std::size_t>(v.size()) != dim_) return false;
    if (is_free()) return v.allFinite();
    for (Eigen::Index j = 0; j < v.size(); ++j) {
      if (!(v[j] >= lo_[j] - tol && v[j] <= hi_[j] + tol)) return false;
    }
    return true;
  }

 private:
  BoxSet(Kind kind, std::size_t dim, Vector lo, Vector hi)
      : kind_(kind), dim_(dim), lo_(std::move(lo)), hi_(std::move(hi)) {}

  Kind kind_;
  std::size_t dim_;
  Vector lo_;
  Vector hi_;
};

/// f(x) = 1/2 x^T H x + c^T x + d.
struct QuadraticSmoothFn {
  Matrix H;
  Vector c;
  double d = 0.0;

  double value(const Vector& x) const { return 0.5 * x.dot(H * x) + c.dot(x) + d; }
  Vector gradient(const Vector& x) const { return H * x + c; }
};

/// One quadratic piece p s^2 + q s + r.
struct QuadraticPiece {
  double p = 0.0;
  double q = 0.0;
  double r = 0.0;

  double value(double s) const { return (p * s + q) * s + r; }
  double derivative(double s) const { return 2.0 * p * s + q; }
};

/// Continuous, strongly convex, piecewise-quadratic scalar function.
///
/// Piece k is active on (b_{k-1}, b_k] with b_0 = -inf and b_{K+1} = +inf.
/// At a breakpoint the Clarke generalized gradient is the interval between the
/// one-sided derivatives.
class PiecewiseScalarFn {
 public:
  static constexpr double kContinuityTol = 1e-12;

  PiecewiseScalarFn() : pieces_{QuadraticPiece{0.5, 0.0, 0.0}} {}

  PiecewiseScalarFn(std::vector<double> breakpoints, std::vector<QuadraticPiece> pieces)
      : breakpoints_(std::move(breakpoints)), pieces_(std::move(pieces)) {
    if (pieces_.size() != breakpoints_.size() + 1) {
      throw Error(ErrorCode::InvalidFunction,
                  "expected " + std::to_string(breakpoints_.size() + 1) + " pieces, got " +
                      std::to_string(pieces_.size()));
    }
    for (std::size_t k = 0; k < breakpoints_.size(); ++k) {
      if (!std::isfinite(breakpoints_[k])) {
        throw Error(ErrorCode::InvalidFunction, "breakpoint " + std::to_string(k) + " is not finite");
      }
      if (k > 0 && !(breakpoints_[k - 1] < breakpoints_[k])) {
        throw Error(ErrorCode::InvalidFunction, "breakpoints must be strictly increasing");
      }
    }
    for (std::size_t k = 0; k < pieces_.size(); ++k) {
      if (!(2.0 * pieces_[k].p > 0.0)) {
        throw Error(ErrorCode::NotStronglyConvex,
                    "piece " + std::to_string(k) + " has non-positive curvature");
      }
    }
    for (std::size_t k = 0; k < breakpoints_.size(); ++k) {
      const double b = breakpoints_[k];
      const double left = pieces_[k].value(b);
      const double right = pieces_[k + 1].value(b);
      const double scale = std::max({1.0, std::abs(left), std::abs(right)});
      if (std::abs(left - right) > kContinuityTol * scale) {
        throw Error(ErrorCode::InvalidFunction,
                    "discontinuity at breakpoint " + std::to_string(k));
      }
      if (pieces_[k].derivative(b) > pieces_[k + 1].derivative(b) + kContinuityTol * scale) {
        throw Error(ErrorCode::InvalidFunction,
                    "left derivative exceeds right derivative at breakpoint " + std::to_string(k));
      }
    }
  }

  /// Smooth quadratic with a single piece.
  static PiecewiseScalarFn quadratic(double p, double q = 0.0, double r = 0.0) {
    return PiecewiseScalarFn({}, {QuadraticPiece{p, q, r}});
  }

  const std::vector<double>& breakpoints() const { return breakpoints_; }
  const std::vector<QuadraticPiece>& pieces() const { return pieces_; }

  /// Index of the piece owning s (breakpoints belong to the left piece).
  std::size_t piece_index(double s) const {
    const auto it = std::lower_bound(breakpoints_.begin(), breakpoints_.end(), s);
    return static_cast<std::size_t>(it - breakpoints_.begin());
  }

  /// Index k with breakpoints()[k] == s, or -1.
  std::ptrdiff_t breakpoint_index(double s) const {
    const auto it = std::lower_bound(breakpoints_.begin(), breakpoints_.end(), s);
    if (it != breakpoints_.end() && *it == s) return it - breakpoints_.begin();
    return -1;
  }

  double value(double s) const { return pieces_[piece_index(s)].value(s); }

  /// Clarke generalized gradient: [left derivative, right derivative].
  Interval clarke_interval(double s) const {
    const auto k = breakpoint_index(s);
    if (k < 0) {
      const double g = pieces_[piece_index(s)].derivative(s);
      return {g, g};
    }
    const auto ku = static_cast<std::size_t>(k);
    return {pieces_[ku].derivative(s), pieces_[ku + 1].derivative(s)};
  }

  /// Smallest second derivative over all pieces.
  double strong_convexity() const {
    double beta = std::numeric_limits<double>::infinity();
    for (const auto& piece : pieces_) beta = std::min(beta, 2.0 * piece.p);
    return beta;
  }

  /// argmin over s in [range.lo, range.hi] of g(s) + (s - v)^2 / (2 step).
  ///
  /// Walks the pieces left to right looking for the zero of the monotone map
  /// s -> dg(s) + (s - v) / step; a breakpoint is returned exactly when zero
  /// lies inside its shifted Clarke interval. The unconstrained minimizer is
  /// then clamped into range.
  double prox(double v, double step, Interval range) const {
    const double inv = 1.0 / step;
    for (std::size_t k = 0; k < pieces_.size(); ++k) {
      const auto& piece = pieces_[k];
      const double s = (v * inv - piece.q) / (2.0 * piece.p + inv);
      const bool above_left = k == 0 || s > breakpoints_[k - 1];
      const bool below_right = k == breakpoints_.size() || s < breakpoints_[k];
      if (above_left && below_right) return range.clamp(s);
      if (k == breakpoints_.size()) break;
      const double b = breakpoints_[k];
      const double shift = (b - v) * inv;
      if (piece.derivative(b) + shift <= 0.0 && 0.0 <= pieces_[k + 1].derivative(b) + shift) {
        return range.clamp(b);
      }
    }
    // Rounding left no bracket; fall back to comparing objective values.
    double best = range.clamp(v);
    double best_obj = prox_objective(best, v, step);
    for (double b : breakpoints_) {
      const double s = range.clamp(b);
      const double obj = prox_objective(s, v, step);
      if (obj < best_obj) {
        best = s;
        best_obj = obj;
      }
    }
    return best;
  }

 private:
  double prox_objective(double s, double v, double step) const {
    const double diff = s - v;
    return value(s) + diff * diff / (2.0 * step);
  }

  std::vector<double> breakpoints_;
  std::vector<QuadraticPiece> pieces_;
};

}  // namespace ppdgd
