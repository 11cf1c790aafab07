// Command-line driver: validate, run, certify, casestudy.
//
// Exit codes: 0 success, 1 usage, 2 problem file parse error, 3 assumption
// failure, 4 integration failure, 5 certification failure.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ppdgd/ppdgd.hpp"

namespace fs = std::filesystem;
using namespace ppdgd;

namespace {

enum Exit : int {
  kOk = 0,
  kUsage = 1,
  kParse = 2,
  kAssumption = 3,
  kIntegration = 4,
  kCertification = 5,
};

struct RunOptions {
  std::string problem_path;
  double dt = 1e-3;
  std::vector<double> taus;
  double t_end = 200.0;
  std::string method = "euler";
  double stop_tol = 1e-8;
  std::size_t record_every = 1;
  std::string out_dir = ".";
  std::optional<unsigned long long> seed;
  std::vector<double> y0;
  std::vector<double> lambda0;
  std::string export_problem;
};

int exit_for_load(const Error& e) {
  std::cerr << "error: " << e.what() << "\n";
  return e.code() == ErrorCode::ParseError || e.code() == ErrorCode::DimensionMismatch ||
                 e.code() == ErrorCode::InvalidFunction
             ? kParse
             : kAssumption;
}

IntegratorConfig make_config(const RunOptions& o, double tau) {
  IntegratorConfig cfg;
  cfg.method = o.method == "rk4" ? Method::TangentRK4 : Method::ProjectedEuler;
  cfg.dt = o.dt;
  cfg.tau = tau;
  cfg.t_end = o.t_end;
  cfg.stop_tol = o.stop_tol;
  cfg.record_every = o.record_every;
  return cfg;
}

Vector to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

/// Initial state: explicit --y0/--lambda0, else random from --seed, else
/// (P_Omega(0), 0).
State initial_state(const Problem& P, const RunOptions& o) {
  State s{project_box(Vector::Zero(P.m()), P.Omega()), Vector::Zero(P.p()), 0.0};
  if (o.seed) {
    std::mt19937_64 rng(*o.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Eigen::Index j = 0; j < P.m(); ++j) {
      s.y[j] = P.Omega().lo()[j] + unit(rng) * (P.Omega().hi()[j] - P.Omega().lo()[j]);
    }
    for (Eigen::Index j = 0; j < P.p(); ++j) s.lambda[j] = normal(rng);
  }
  if (!o.y0.empty()) s.y = to_vector(o.y0);
  if (!o.lambda0.empty()) s.lambda = to_vector(o.lambda0);
  return s;
}

void print_constants(const Problem& P) {
  std::printf("alpha   = %.10g\n", P.alpha());
  std::printf("alpha_m = %.10g\n", P.alpha_m());
  std::printf("beta    = %.10g\n", P.beta());
  std::printf("kappa1  = %.10g\n", P.kappa1());
  std::printf("gamma   = %.10g\n", P.gamma());
}

int cmd_validate(const RunOptions& o) {
  std::optional<Problem> P;
  try {
    P.emplace(io::load_problem(o.problem_path));
  } catch (const Error& e) {
    const int code = exit_for_load(e);
    if (code == kAssumption) std::printf("assumptions: FAIL (%s)\n", std::string(to_string(e.code())).c_str());
    return code;
  }
  print_constants(*P);
  const double slater = slater_residual(*P);
  const bool slater_ok = slater <= 1e-9;
  std::printf("assumption 1 (Slater, residual %.3g): %s\n", slater, slater_ok ? "pass" : "FAIL");
  std::printf("assumption 2 (f strongly convex, alpha > 0): pass\n");
  std::printf("assumption 3 (h strongly convex, beta > 0): pass\n");
  std::printf("assumption 4 (A full row rank, kappa1 > 0): pass\n");
  return slater_ok ? kOk : kAssumption;
}

int cmd_run(const RunOptions& o, bool certify) {
  std::optional<Problem> P;
  try {
    P.emplace(io::load_problem(o.problem_path));
  } catch (const Error& e) {
    return exit_for_load(e);
  }
  const double tau = o.taus.empty() ? 1.0 : o.taus.front();
  Trajectory traj;
  try {
    traj = integrate(*P, initial_state(*P, o), make_config(o, tau));
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIntegration;
  }
  for (const auto& w : traj.warnings) std::cerr << "warning: " << w << "\n";

  fs::create_directories(o.out_dir);
  std::ostringstream csv;
  io::write_trajectory_csv(csv, traj);
  io::write_text(fs::path(o.out_dir) / "trajectory.csv", csv.str());

  const Sample& last = traj.back();
  const Vector x_end = solve_inner(*P, last.lambda).x_star;
  const KktResidual kkt = kkt_residual(*P, x_end, last.y, last.lambda);
  std::printf("terminated_by = %s after %zu steps (t = %.6g)\n",
              std::string(to_string(traj.terminated_by)).c_str(), traj.steps, last.t);
  std::printf("drift_norm    = %.3e\n", last.drift_norm);
  std::printf("kkt total     = %.3e\n", kkt.total);
  if (!certify) return kOk;

  try {
    const Equilibrium eq = equilibrium_oracle(*P);
    const ConvergenceReport report = certify_envelope(*P, traj, eq);
    bool invariant = true;
    for (const auto& s : traj.samples) invariant = invariant && P->Omega().contains(s.y, kActivityTol);

    std::ostringstream env;
    io::write_envelope_csv(env, traj, report);
    io::write_text(fs::path(o.out_dir) / "envelope.csv", env.str());
    io::write_text(fs::path(o.out_dir) / "report.json", io::report_to_json(report).dump(2) + "\n");

    std::printf("gamma         = %.10g (envelope exponent %.10g)\n", report.gamma_bound,
                report.envelope_exponent());
    std::printf("envelope      = %s (margin %.3e)\n", report.envelope_ok ? "ok" : "VIOLATED",
                report.envelope_margin);
    std::printf("fitted_rate   = %.6g\n", report.fitted_rate);
    std::printf("invariance    = %s\n", invariant ? "ok" : "VIOLATED");
    return report.envelope_ok && invariant ? kOk : kCertification;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kCertification;
  }
}

int cmd_casestudy(const RunOptions& o) {
  const Problem P = casestudy::build_case();
  if (!o.export_problem.empty()) {
    io::write_text(o.export_problem, io::problem_to_json(P).dump(2) + "\n");
  }
  print_constants(P);
  const std::vector<double> taus = o.taus.empty() ? std::vector<double>{1.0} : o.taus;
  try {
    const Equilibrium eq = equilibrium_oracle(P);
    const auto runs = casestudy::run_sweep(P, eq, taus, make_config(o, 1.0));
    bool ok = true;
    for (const auto& run : runs) {
      io::write_case_outputs(o.out_dir, run);
      std::printf("tau = %-6g envelope %s  exponent %.6g  fitted_rate %.6g  invariance %s  endpoint gap %.3e\n",
                  run.report.tau, run.report.envelope_ok ? "ok" : "VIOLATED",
                  run.report.envelope_exponent(), run.report.fitted_rate,
                  run.omega_invariant ? "ok" : "VIOLATED", run.endpoint_gap);
      ok = ok && run.report.envelope_ok && run.omega_invariant;
    }
    return ok ? kOk : kCertification;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code() == ErrorCode::NonFiniteState || e.code() == ErrorCode::InvalidConfig
               ? kIntegration
               : kCertification;
  }
}

void add_integration_flags(CLI::App* cmd, RunOptions& o, bool repeat_tau) {
  cmd->add_option("--dt", o.dt, "Time step")->check(CLI::PositiveNumber);
  auto* tau = cmd->add_option("--tau", o.taus, "Time scaling tau")->check(CLI::PositiveNumber);
  if (!repeat_tau) tau->expected(1);
  cmd->add_option("--t-end", o.t_end, "Final time")->check(CLI::PositiveNumber);
  cmd->add_option("--method", o.method, "Integrator")->check(CLI::IsMember({"euler", "rk4"}));
  cmd->add_option("--stop-tol", o.stop_tol, "Stop when the drift norm falls below this");
  cmd->add_option("--record-every", o.record_every, "Record every k-th step")->check(CLI::PositiveNumber);
  cmd->add_option("--out", o.out_dir, "Output directory");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Projected partial primal-dual gradient dynamics"};
  app.require_subcommand(1);
  RunOptions o;

  auto* validate = app.add_subcommand("validate", "Print derived constants and check assumptions");
  validate->add_option("problem", o.problem_path, "Problem JSON file")->required();

  auto* run = app.add_subcommand("run", "Integrate the dynamics and write trajectory.csv");
  auto* certify = app.add_subcommand("certify", "Integrate, compute the equilibrium, certify the envelope");
  for (auto* cmd : {run, certify}) {
    cmd->add_option("problem", o.problem_path, "Problem JSON file")->required();
    add_integration_flags(cmd, o, false);
    cmd->add_option("--seed", o.seed, "Seed for a random initial condition");
    cmd->add_option("--y0", o.y0, "Initial y")->delimiter(',');
    cmd->add_option("--lambda0", o.lambda0, "Initial lambda")->delimiter(',');
  }

  auto* cases = app.add_subcommand("casestudy", "Run the feeder voltage-control instance");
  add_integration_flags(cases, o, true);
  cases->add_option("--export-problem", o.export_problem, "Also write the instance as problem JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*validate) return cmd_validate(o);
    if (*run) return cmd_run(o, false);
    if (*certify) return cmd_run(o, true);
    if (*cases) {
      if (cases->count("--record-every") == 0) o.record_every = 10;
      return cmd_casestudy(o);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIntegration;
  }
  return kUsage;
}
