#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ppdgd/errors.hpp"
#include "ppdgd/objectives.hpp"

namespace ppdgd {

/// Band used to decide whether a coordinate sits on a face of a box.
inline constexpr double kActivityTol = 1e-9;

struct ConeQueryResult {
  Vector projected;
  std::vector<Eigen::Index> active_lower;
  std::vector<Eigen::Index> active_upper;
};

namespace detail {

inline void check_dim(const Vector& v, const BoxSet& S, const char* what) {
  if (static_cast<std::size_t>(v.size()) != S.dim()) {
    throw Error(ErrorCode::DimensionMismatch, std::string(what) + " has dimension " +
                                                  std::to_string(v.size()) + ", set has " +
                                                  std::to_string(S.dim()));
  }
}

inline void check_member(const Vector& y, const BoxSet& S) {
  if (!S.contains(y, kActivityTol)) {
    throw Error(ErrorCode::PointOutsideSet, "point lies outside the set beyond tolerance");
  }
}

}  // namespace detail

/// Euclidean projection onto S: componentwise clamp (identity for Free).
inline Vector project_box(const Vector& v, const BoxSet& S) {
  detail::check_dim(v, S, "vector");
  if (S.is_free()) return v;
  return v.cwiseMax(S.lo()).cwiseMin(S.hi());
}

/// Projection of v onto the tangent cone of S at y, with the active faces.
///
/// On a box the tangent cone is a product of half-lines, so the projection
/// drops the outward component at every active face and zeroes coordinates
/// with lo == hi.
inline ConeQueryResult tangent_cone_query(const Vector& y, const Vector& v, const BoxSet& S) {
  detail::check_dim(y, S, "point");
  detail::check_dim(v, S, "direction");
  detail::check_member(y, S);
  ConeQueryResult out{v, {}, {}};
  if (S.is_free()) return out;
  for (Eigen::Index j = 0; j < v.size(); ++j) {
    const bool at_lower = y[j] <= S.lo()[j] + kActivityTol;
    const bool at_upper = y[j] >= S.hi()[j] - kActivityTol;
    if (at_lower) out.active_lower.push_back(j);
    if (at_upper) out.active_upper.push_back(j);
    if (S.lo()[j] == S.hi()[j]) {
      out.projected[j] = 0.0;
    } else {
      if (at_lower) out.projected[j] = std::max(0.0, out.projected[j]);
      if (at_upper) out.projected[j] = std::min(0.0, out.projected[j]);
    }
  }
  return out;
}

inline Vector tangent_project(const Vector& y, const Vector& v, const BoxSet& S) {
  return tangent_cone_query(y, v, S).projected;
}

/// Whether w lies in the normal cone of S at y (tolerance 1e-9).
inline bool normal_cone_contains(const Vector& y, const Vector& w, const BoxSet& S) {
  detail::check_dim(y, S, "point");
  detail::check_dim(w, S, "vector");
  detail::check_member(y, S);
  for (Eigen::Index j = 0; j < w.size(); ++j) {
    const bool at_lower = !S.is_free() && y[j] <= S.lo()[j] + kActivityTol;
    const bool at_upper = !S.is_free() && y[j] >= S.hi()[j] - kActivityTol;
    if (at_lower && at_upper) continue;  // degenerate coordinate: any w_j
    if (at_lower) {
      if (w[j] > kActivityTol) return false;
    } else if (at_upper) {
      if (w[j] < -kActivityTol) return false;
    } else if (std::abs(w[j]) > kActivityTol) {
      return false;
    }
  }
  return true;
}

/// Normal cone of coordinate j of S at y_j, as an interval.
inline Interval normal_cone_interval(const BoxSet& S, Eigen::Index j, double yj) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  if (S.is_free()) return {0.0, 0.0};
  const bool at_lower = yj <= S.lo()[j] + kActivityTol;
  const bool at_upper = yj >= S.hi()[j] - kActivityTol;
  return {at_lower ? -inf : 0.0, at_upper ? inf : 0.0};
}

}  // namespace ppdgd
