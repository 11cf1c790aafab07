#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ppdgd/analysis.hpp"
#include "ppdgd/casestudy.hpp"
#include "ppdgd/dynamics.hpp"
#include "ppdgd/errors.hpp"
#include "ppdgd/problem.hpp"

namespace ppdgd::io {

using json = nlohmann::json;

namespace detail {

[[noreturn]] inline void fail(const std::string& path, const std::string& what) {
  throw Error(ErrorCode::ParseError, path + ": " + what);
}

inline const json& field(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.is_object()) fail(path, "expected an object");
  const auto it = obj.find(key);
  if (it == obj.end()) fail(path + "." + key, "missing field");
  return *it;
}

inline double number(const json& v, const std::string& path) {
  if (!v.is_number()) fail(path, "expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) fail(path, "expected a finite number");
  return d;
}

inline Eigen::Index count(const json& v, const std::string& path) {
  if (!v.is_number_integer() || v.get<long long>() <= 0) fail(path, "expected a positive integer");
  return static_cast<Eigen::Index>(v.get<long long>());
}

inline Vector vector(const json& v, const std::string& path, Eigen::Index expected) {
  if (!v.is_array()) fail(path, "expected an array");
  if (static_cast<Eigen::Index>(v.size()) != expected) {
    fail(path, "expected " + std::to_string(expected) + " entries, got " + std::to_string(v.size()));
  }
  Vector out(expected);
  for (Eigen::Index i = 0; i < expected; ++i) {
    out[i] = number(v[static_cast<std::size_t>(i)], path + "[" + std::to_string(i) + "]");
  }
  return out;
}

inline Matrix matrix(const json& v, const std::string& path, Eigen::Index rows, Eigen::Index cols) {
  if (!v.is_array()) fail(path, "expected an array of rows");
  if (static_cast<Eigen::Index>(v.size()) != rows) {
    fail(path, "expected " + std::to_string(rows) + " rows, got " + std::to_string(v.size()));
  }
  Matrix out(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    out.row(r) = vector(v[static_cast<std::size_t>(r)], path + "[" + std::to_string(r) + "]", cols)
                     .transpose();
  }
  return out;
}

inline BoxSet box_set(const json& v, const std::string& path, Eigen::Index dim) {
  const json& kind = field(v, "kind", path);
  if (!kind.is_string()) fail(path + ".kind", "expected a string");
  const auto k = kind.get<std::string>();
  if (k == "free") return BoxSet::free(static_cast<std::size_t>(dim));
  if (k != "box") fail(path + ".kind", "expected \"free\" or \"box\", got \"" + k + "\"");
  Vector lo = vector(field(v, "lo", path), path + ".lo", dim);
  Vector hi = vector(field(v, "hi", path), path + ".hi", dim);
  for (Eigen::Index j = 0; j < dim; ++j) {
    if (lo[j] > hi[j]) fail(path + ".lo[" + std::to_string(j) + "]", "exceeds hi");
  }
  return BoxSet::box(std::move(lo), std::move(hi));
}

inline PiecewiseScalarFn piecewise(const json& v, const std::string& path) {
  const json& bps = field(v, "breakpoints", path);
  if (!bps.is_array()) fail(path + ".breakpoints", "expected an array");
  std::vector<double> breakpoints;
  for (std::size_t k = 0; k < bps.size(); ++k) {
    breakpoints.push_back(number(bps[k], path + ".breakpoints[" + std::to_string(k) + "]"));
  }
  const json& pcs = field(v, "pieces", path);
  if (!pcs.is_array()) fail(path + ".pieces", "expected an array");
  std::vector<QuadraticPiece> pieces;
  for (std::size_t k = 0; k < pcs.size(); ++k) {
    const std::string pp = path + ".pieces[" + std::to_string(k) + "]";
    pieces.push_back(QuadraticPiece{number(field(pcs[k], "p", pp), pp + ".p"),
                                    number(field(pcs[k], "q", pp), pp + ".q"),
                                    number(field(pcs[k], "r", pp), pp + ".r")});
  }
  try {
    return PiecewiseScalarFn(std::move(breakpoints), std::move(pieces));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::NotStronglyConvex) throw;
    fail(path, e.what());
  }
}

}  // namespace detail

/// Parses a problem document. Structural problems raise ParseError citing the
/// JSON path; assumption failures surface from build_problem with their own
/// codes.
inline Problem problem_from_json(const json& doc) {
  using namespace detail;
  const std::string root = "$";
  const Eigen::Index n = count(field(doc, "n", root), "$.n");
  const Eigen::Index m = count(field(doc, "m", root), "$.m");
  const Eigen::Index p = count(field(doc, "p", root), "$.p");

  QuadraticSmoothFn f;
  const json& H = field(doc, "H", root);
  if (H.is_object()) {
    f.H = vector(field(H, "diag", "$.H"), "$.H.diag", n).asDiagonal();
  } else {
    f.H = matrix(H, "$.H", n, n);
  }
  f.c = doc.contains("c") ? vector(doc["c"], "$.c", n) : Vector::Zero(n);
  f.d = doc.contains("d") ? number(doc["d"], "$.d") : 0.0;

  Matrix A = matrix(field(doc, "A", root), "$.A", p, n);
  Matrix B = matrix(field(doc, "B", root), "$.B", p, m);
  Vector C = vector(field(doc, "C", root), "$.C", p);

  const json& hs = field(doc, "h", root);
  if (!hs.is_array() || static_cast<Eigen::Index>(hs.size()) != m) {
    fail("$.h", "expected an array of " + std::to_string(m) + " functions");
  }
  std::vector<PiecewiseScalarFn> h;
  for (std::size_t j = 0; j < hs.size(); ++j) h.push_back(piecewise(hs[j], "$.h[" + std::to_string(j) + "]"));

  BoxSet X = box_set(field(doc, "X", root), "$.X", n);
  const json& omega = field(doc, "Omega", root);
  BoxSet Omega = box_set(omega, "$.Omega", m);
  return build_problem(std::move(f), std::move(h), std::move(A), std::move(B), std::move(C),
                       std::move(X), std::move(Omega));
}

inline Problem load_problem(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ParseError, path.string() + ": cannot open file");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
  return problem_from_json(doc);
}

namespace detail {

inline json to_json(const Vector& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

inline json to_json(const Matrix& M) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < M.rows(); ++r) rows.push_back(to_json(Vector(M.row(r).transpose())));
  return rows;
}

inline json to_json(const BoxSet& S) {
  if (S.is_free()) return json{{"kind", "free"}};
  return json{{"kind", "box"}, {"lo", to_json(S.lo())}, {"hi", to_json(S.hi())}};
}

inline json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace detail

inline json problem_to_json(const Problem& P) {
  using detail::to_json;
  json doc;
  doc["n"] = P.n();
  doc["m"] = P.m();
  doc["p"] = P.p();
  if (P.hessian_is_diagonal()) {
    doc["H"] = json{{"diag", to_json(Vector(P.f().H.diagonal()))}};
  } else {
    doc["H"] = to_json(P.f().H);
  }
  doc["c"] = to_json(P.f().c);
  doc["d"] = P.f().d;
  doc["A"] = to_json(P.A());
  doc["B"] = to_json(P.B());
  doc["C"] = to_json(P.C());
  json hs = json::array();
  for (const auto& hj : P.h()) {
    json pieces = json::array();
    for (const auto& piece : hj.pieces()) pieces.push_back(json{{"p", piece.p}, {"q", piece.q}, {"r", piece.r}});
    hs.push_back(json{{"breakpoints", hj.breakpoints()}, {"pieces", pieces}});
  }
  doc["h"] = hs;
  doc["X"] = to_json(P.X());
  doc["Omega"] = to_json(P.Omega());
  return doc;
}

inline json kkt_to_json(const KktResidual& k) {
  return json{{"r_x", k.r_x}, {"r_y", k.r_y}, {"r_eq", k.r_eq}, {"total", k.total}};
}

inline json report_to_json(const ConvergenceReport& r) {
  using detail::to_json;
  json doc;
  doc["equilibrium"] = json{{"y_star", to_json(r.equilibrium.y)},
                            {"lambda_star", to_json(r.equilibrium.lambda)},
                            {"x_star", to_json(r.equilibrium.x)}};
  doc["gamma_bound"] = r.gamma_bound;
  doc["tau"] = r.tau;
  doc["envelope_ok"] = r.envelope_ok;
  doc["envelope_margin"] = detail::number_or_null(r.envelope_margin);
  doc["fitted_rate"] = detail::number_or_null(r.fitted_rate);
  doc["kkt"] = kkt_to_json(r.kkt);
  return doc;
}

inline std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline void write_trajectory_csv(std::ostream& out, const Trajectory& traj) {
  if (traj.samples.empty()) return;
  const auto m = traj.samples.front().y.size();
  const auto p = traj.samples.front().lambda.size();
  out << "t";
  for (Eigen::Index j = 1; j <= m; ++j) out << ",y_" << j;
  for (Eigen::Index j = 1; j <= p; ++j) out << ",lambda_" << j;
  out << ",drift_norm\n";
  for (const auto& s : traj.samples) {
    out << format_number(s.t);
    for (Eigen::Index j = 0; j < m; ++j) out << ',' << format_number(s.y[j]);
    for (Eigen::Index j = 0; j < p; ++j) out << ',' << format_number(s.lambda[j]);
    out << ',' << format_number(s.drift_norm) << '\n';
  }
}

/// Columns t, bound, distance for the certified envelope.
inline void write_envelope_csv(std::ostream& out, const Trajectory& traj, const ConvergenceReport& r) {
  out << "t,bound,distance\n";
  if (traj.samples.empty()) return;
  const double t0 = traj.samples.front().t;
  const double d0 = distance_to(r.equilibrium, traj.samples.front().y, traj.samples.front().lambda);
  for (const auto& s : traj.samples) {
    const double bound = d0 * std::exp(-r.envelope_exponent() * (s.t - t0));
    out << format_number(s.t) << ',' << format_number(bound) << ','
        << format_number(distance_to(r.equilibrium, s.y, s.lambda)) << '\n';
  }
}

/// Compact rendering of tau for file names: 1, 2, 0.5, ...
inline std::string tau_label(double tau) {
  std::ostringstream os;
  os << tau;
  return os.str();
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::InvalidConfig, "cannot write " + path.string());
  out << text;
}

/// Writes trajectory_tau<tau>.csv, envelope_tau<tau>.csv, report_tau<tau>.json.
inline std::vector<std::filesystem::path> write_case_outputs(const std::filesystem::path& dir,
                                                             const casestudy::CaseRun& run) {
  std::filesystem::create_directories(dir);
  const std::string label = tau_label(run.report.tau);
  std::vector<std::filesystem::path> files{dir / ("trajectory_tau" + label + ".csv"),
                                           dir / ("envelope_tau" + label + ".csv"),
                                           dir / ("report_tau" + label + ".json")};
  std::ostringstream traj, env;
  write_trajectory_csv(traj, run.trajectory);
  write_envelope_csv(env, run.trajectory, run.report);
  write_text(files[0], traj.str());
  write_text(files[1], env.str());
  write_text(files[2], report_to_json(run.report).dump(2) + "\n");
  return files;
}

}  // namespace ppdgd::io
