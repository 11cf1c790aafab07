#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <sstream>

#include "ppdgd/ppdgd.hpp"
#include "test_support.hpp"

using namespace ppdgd;
using nlohmann::json;

namespace {

void expect_parse_error_mentions(const json& doc, const std::string& path) {
  try {
    io::problem_from_json(doc);
    FAIL() << "expected a parse error at " << path;
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ParseError);
    EXPECT_NE(std::string(e.what()).find(path), std::string::npos) << e.what();
  }
}

json identity_doc() { return io::problem_to_json(fixtures::identity_problem()); }

}  // namespace

TEST(Feeder, RadialLineSpectrum) {
  // Path graph grounded at one end: eigenvalues 2 - 2 cos((2k - 1) pi / (2N + 1)).
  const Matrix L = casestudy::radial_line_matrix(7, 0.1165);
  EXPECT_TRUE(L.isApprox(L.transpose(), 0.0));
  const Vector eig = Eigen::SelfAdjointEigenSolver<Matrix>(L).eigenvalues();
  const double scale = 0.1165 / (2 - 2 * std::cos(std::numbers::pi / 15));
  for (int k = 1; k <= 7; ++k) {
    EXPECT_NEAR(eig[k - 1], scale * (2 - 2 * std::cos((2 * k - 1) * std::numbers::pi / 15)), 1e-12);
  }
}

TEST(Feeder, ProblemMapping) {
  const casestudy::FeederSpec spec;
  const Problem P = casestudy::build_case(spec);
  EXPECT_EQ(P.n(), 7);
  EXPECT_EQ(P.m(), 7);
  EXPECT_EQ(P.p(), 7);
  EXPECT_TRUE(P.B().isApprox(-Matrix::Identity(7, 7)));
  EXPECT_TRUE(P.f().H.isApprox(8.0 * Matrix::Identity(7, 7)));
  EXPECT_TRUE(P.X().is_free());
  EXPECT_DOUBLE_EQ(P.Omega().hi()[4], 1.04);
  EXPECT_DOUBLE_EQ(P.Omega().lo()[2], -0.88);
  EXPECT_TRUE(P.C().isApprox(spec.C));
  EXPECT_NEAR(Eigen::SelfAdjointEigenSolver<Matrix>(P.A()).eigenvalues().minCoeff(), 0.1165, 1e-12);
}

TEST(Feeder, SweepCertifiesEveryTau) {
  const Problem P = casestudy::build_case();
  const Equilibrium eq = equilibrium_oracle(P);
  const auto runs = casestudy::run_sweep(P, eq, {1.0, 2.0, 5.0}, casestudy::default_config());
  ASSERT_EQ(runs.size(), 3u);
  for (const auto& run : runs) {
    EXPECT_TRUE(run.report.envelope_ok) << "tau " << run.report.tau;
    EXPECT_TRUE(run.omega_invariant);
    EXPECT_LT(run.endpoint_gap, 1e-6);
    EXPECT_LT(run.endpoint_kkt.total, 1e-6);
  }
  // The concurrent sweep matches a sequential run bit for bit.
  const auto single = casestudy::run_case(P, eq, casestudy::default_config(2.0));
  EXPECT_EQ(single.trajectory.back().y, runs[1].trajectory.back().y);
  EXPECT_EQ(single.trajectory.back().lambda, runs[1].trajectory.back().lambda);
}

TEST(Io, ParseErrorsCiteJsonPath) {
  json doc = identity_doc();
  doc.erase("A");
  expect_parse_error_mentions(doc, "$.A");

  doc = identity_doc();
  doc["C"] = json::array({0.0});
  expect_parse_error_mentions(doc, "$.C");

  doc = identity_doc();
  doc["h"][1]["pieces"][0]["p"] = "one";
  expect_parse_error_mentions(doc, "$.h[1]");

  doc = identity_doc();
  doc["Omega"]["kind"] = "ball";
  expect_parse_error_mentions(doc, "$.Omega");

  doc = identity_doc();
  doc["H"] = json{{"diag", json::array({1.0})}};
  expect_parse_error_mentions(doc, "$.H.diag");
}

TEST(Io, AssumptionFailuresKeepTheirCode) {
  json doc = identity_doc();
  doc["A"] = json::array({json::array({1.0, 1.0}), json::array({2.0, 2.0})});
  try {
    io::problem_from_json(doc);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::RankDeficient);
  }
}

TEST(Io, ProblemRoundTrip) {
  fixtures::Generator gen(61);
  for (int trial = 0; trial < 20; ++trial) {
    const Problem P = gen.problem();
    const json doc = io::problem_to_json(P);
    const Problem Q = io::problem_from_json(json::parse(doc.dump()));
    EXPECT_EQ(P.f().H, Q.f().H);
    EXPECT_EQ(P.A(), Q.A());
    EXPECT_EQ(P.B(), Q.B());
    EXPECT_EQ(P.C(), Q.C());
    EXPECT_EQ(P.Omega().lo(), Q.Omega().lo());
    EXPECT_EQ(P.gamma(), Q.gamma());
    EXPECT_EQ(io::problem_to_json(Q), doc);
  }
}

TEST(Io, DiagonalHessianAndOptionalFields) {
  json doc = identity_doc();
  ASSERT_TRUE(doc["H"].is_object());
  doc.erase("c");
  doc.erase("d");
  const Problem P = io::problem_from_json(doc);
  EXPECT_EQ(P.f().c, Vector::Zero(2));
  EXPECT_EQ(P.f().d, 0.0);
}

TEST(Io, BundledFeederFileMatchesBuilder) {
  const Problem built = casestudy::build_case();
  const Problem loaded = io::load_problem(std::filesystem::path(PPDGD_DATA_DIR) / "voltage_case.json");
  EXPECT_EQ(io::problem_to_json(built), io::problem_to_json(loaded));
}

TEST(Io, TrajectoryCsvLayout) {
  const Problem P = fixtures::identity_problem();
  IntegratorConfig cfg;
  cfg.t_end = 0.01;
  cfg.stop_tol = 0.0;
  const Trajectory traj = integrate(P, State{Vector::Constant(2, 0.1), Vector::Constant(2, 1.0 / 3.0), 0.0}, cfg);
  std::ostringstream out;
  io::write_trajectory_csv(out, traj);
  std::istringstream in(out.str());
  std::string header, first;
  std::getline(in, header);
  std::getline(in, first);
  EXPECT_EQ(header, "t,y_1,y_2,lambda_1,lambda_2,drift_norm");
  EXPECT_NE(first.find("0.33333333333333331"), std::string::npos) << first;
  std::size_t rows = 1;
  for (std::string line; std::getline(in, line);) ++rows;
  EXPECT_EQ(rows, traj.samples.size());
  EXPECT_EQ(io::format_number(0.1), "0.10000000000000001");
}

TEST(Io, ReportJsonFields) {
  ConvergenceReport r;
  r.equilibrium = Equilibrium{Vector::Zero(1), Vector::Ones(1), Vector::Zero(1)};
  r.gamma_bound = 2.0;
  r.tau = 5.0;
  r.envelope_ok = true;
  r.envelope_margin = 0.5;
  const json doc = io::report_to_json(r);
  for (const char* key : {"equilibrium", "gamma_bound", "tau", "envelope_ok", "envelope_margin", "fitted_rate", "kkt"}) {
    EXPECT_TRUE(doc.contains(key)) << key;
  }
  for (const char* key : {"y_star", "lambda_star", "x_star"}) EXPECT_TRUE(doc["equilibrium"].contains(key)) << key;
  for (const char* key : {"r_x", "r_y", "r_eq", "total"}) EXPECT_TRUE(doc["kkt"].contains(key)) << key;
  EXPECT_TRUE(doc["fitted_rate"].is_null());
  EXPECT_EQ(io::tau_label(5.0), "5");
  EXPECT_EQ(io::tau_label(0.5), "0.5");
}
