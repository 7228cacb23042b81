// Command-line front end: nominal solve, shaping + tuning, and stability
// verification, driven by a TOML config. Artifacts land in per-stage
// subdirectories under the output root so later stages can re-use earlier
// results (theta and the shaping map are persisted).

#include <CLI11.hpp>

#include <Eigen/Dense>
#include <filesystem>
#include <iostream>
#include <string>

#include "pis/config.hpp"
#include "pis/io.hpp"
#include "pis/nominal.hpp"
#include "pis/shaping.hpp"
#include "pis/simulate.hpp"
#include "pis/tuning.hpp"
#include "pis/verify.hpp"

namespace fs = std::filesystem;
using namespace pis;

namespace {

struct NominalArtifacts {
  ValueFunction phi0;
  Linearization lin;
  double care_residual = 0.0;
  int pi_iterations = 0;
  double pi_validation_residual = 0.0;
};

NominalArtifacts solve_nominal(const RunConfig& cfg) {
  NominalArtifacts art;
  art.lin = linearize(cfg.system, cfg.cost.Q);
  if (!art.lin.controllable)
    std::cerr << "warning: linearized pair (A0, B0) is not controllable (rank "
              << art.lin.controllability_rank << ")\n";
  if (!art.lin.observable)
    std::cerr << "warning: linearized pair (A0, Q^1/2) is not observable (rank "
              << art.lin.observability_rank << ")\n";

  if (cfg.system_name == "lti3") {
    art.phi0 = solve_care(art.lin.A0, art.lin.B0, cfg.cost, cfg.weight, cfg.care_tol);
    art.care_residual =
        care_residual_matrix(art.lin.A0, art.lin.B0, cfg.cost.Q, cfg.weight, art.phi0.P()).norm();
  } else {
    auto basis = enumerate_even_monomials(cfg.system.n, cfg.value_degree);
    auto result = fit_nominal_policy_iteration(cfg.system, cfg.cost, cfg.weight, basis,
                                               cfg.domain_lower, cfg.domain_upper, cfg.pi_samples,
                                               cfg.pi_tol, cfg.pi_max_iter);
    art.phi0 = result.phi;
    art.pi_iterations = result.iterations;
    art.pi_validation_residual = result.validation_residual;
  }
  return art;
}

ShapingSolution build_shaping(const RunConfig& cfg, const ValueFunction& phi0) {
  ShapingProblem prob{cfg.system,
                      cfg.weight,
                      phi0,
                      enumerate_even_monomials(cfg.system.n, cfg.m_degree),
                      enumerate_even_monomials(cfg.system.n, cfg.h_degree),
                      cfg.domain_lower,
                      cfg.domain_upper,
                      cfg.collocation_samples};
  return solve_shaping(prob);
}

void add_resolved_config(RunSummary& summary, const RunConfig& cfg, std::uint64_t seed) {
  summary.add("config.system", cfg.system_name);
  summary.add("config.seed", static_cast<long>(seed));
  summary.add("config.m_degree", cfg.m_degree);
  summary.add("config.h_degree", cfg.h_degree);
  summary.add("config.value_degree", cfg.value_degree);
  summary.add("config.collocation_samples", cfg.collocation_samples);
  summary.add("config.objective.component", cfg.penalty.component);
  summary.add("config.objective.threshold", cfg.penalty.threshold);
  summary.add("config.objective.beta", cfg.penalty.beta);
  summary.add("config.objective.mode",
              std::string(cfg.mode == AggregationMode::Sum ? "sum" : "mean"));
  summary.add("config.tuning.gamma", cfg.tuning.gamma);
  summary.add("config.tuning.max_iter", cfg.tuning.max_iter);
  summary.add("config.tuning.grad_tol", cfg.tuning.grad_tol);
  summary.add("config.tuning.dt", cfg.tuning.dt);
  summary.add("config.tuning.horizon", cfg.tuning.horizon);
  summary.add("config.tuning.step_rule",
              std::string(cfg.tuning.step_rule == StepRule::Fixed        ? "fixed"
                          : cfg.tuning.step_rule == StepRule::Normalized ? "normalized"
                                                                         : "backtracking"));
  summary.add("config.tuning.initial_condition_count",
              static_cast<int>(cfg.tuning.initial_conditions.size()));
  for (int j = 0; j < cfg.domain_lower.size(); ++j) {
    summary.add("config.domain.lower." + std::to_string(j), cfg.domain_lower[j]);
    summary.add("config.domain.upper." + std::to_string(j), cfg.domain_upper[j]);
  }
}

void write_nominal_stage(const fs::path& dir, const RunConfig& cfg, const NominalArtifacts& art,
                         std::uint64_t seed) {
  fs::create_directories(dir);
  RunSummary summary;
  add_resolved_config(summary, cfg, seed);
  if (cfg.system_name == "lti3") {
    summary.add("nominal.method", std::string("care"));
    summary.add("nominal.care_residual", art.care_residual);
    write_matrix(dir / "P.csv", art.phi0.P());
  } else {
    summary.add("nominal.method", std::string("policy_iteration"));
    summary.add("nominal.iterations", art.pi_iterations);
    summary.add("nominal.validation_residual", art.pi_validation_residual);
    summary.add_basis("nominal.value_basis", art.phi0.basis());
    write_vector(dir / "value_coeffs.txt", art.phi0.coeffs());
  }

  Eigen::MatrixXd B0 = cfg.system.g(Eigen::VectorXd::Zero(cfg.system.n));
  auto controller = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd {
    return -0.5 * cfg.weight.R_inv * cfg.system.g(x).transpose() * art.phi0.gradient(x);
  };
  Trajectory traj =
      rollout(cfg.system, controller, cfg.nominal_x0, cfg.tuning.horizon, cfg.tuning.dt);
  write_trajectory_csv(dir / "nominal_traj.csv", traj);
  summary.add("nominal.terminal_norm", traj.state(traj.steps()).norm());
  summary.write(dir / "summary.txt");
}

void write_shaping_stage(const fs::path& dir, const RunConfig& cfg, const ShapingSolution& sol) {
  fs::create_directories(dir);
  RunSummary summary;
  summary.add_basis("shaping.basis_m", sol.problem().basis_m);
  summary.add_basis("shaping.basis_h", sol.problem().basis_h);
  summary.add("shaping.M_rows", static_cast<int>(sol.M().rows()));
  summary.add("shaping.M_cols", static_cast<int>(sol.M().cols()));
  summary.add("shaping.residual_rms", sol.residual_rms());
  summary.write(dir / "summary.txt");
  write_matrix(dir / "M.csv", sol.M());
}

// Non-negativity of mbar and h is monitored, not enforced: evaluate both on
// a 1000-point grid and report the minima.
std::pair<double, double> nonneg_minima(const ShapingSolution& sol, const RunConfig& cfg,
                                        const Eigen::VectorXd& theta) {
  auto grid = halton_box(cfg.domain_lower, cfg.domain_upper, 1000);
  double min_mbar = 0.0, min_h = 0.0;
  for (const auto& x : grid) {
    min_mbar = std::min(min_mbar, sol.mbar(theta, x));
    min_h = std::min(min_h, sol.h_value_grad(theta, x).first);
  }
  return {min_mbar, min_h};
}

int cmd_nominal(const std::string& config_path, const std::string& out_dir, std::uint64_t seed) {
  RunConfig cfg = load_run_config(config_path, seed);
  NominalArtifacts art = solve_nominal(cfg);
  write_nominal_stage(fs::path(out_dir) / "nominal", cfg, art, seed);
  std::cout << "nominal stage written to " << (fs::path(out_dir) / "nominal").string() << "\n";
  return 0;
}

int cmd_tune(const std::string& config_path, const std::string& out_dir, std::uint64_t seed) {
  RunConfig cfg = load_run_config(config_path, seed);
  NominalArtifacts art = solve_nominal(cfg);
  write_nominal_stage(fs::path(out_dir) / "nominal", cfg, art, seed);

  ShapingSolution sol = build_shaping(cfg, art.phi0);
  write_shaping_stage(fs::path(out_dir) / "shaping", cfg, sol);

  TuningResult result = gradient_descent(sol, cfg.penalty, cfg.tuning);

  fs::path dir = fs::path(out_dir) / "tuning";
  fs::create_directories(dir);
  write_history_csv(dir / "history.csv", result.history);
  write_vector(dir / "theta.txt", result.theta);
  write_vector(dir / "c.txt", sol.h_coeffs(result.theta));

  Trajectory nominal_traj = rollout(
      cfg.system, [&](const Eigen::VectorXd& x) { return sol.nominal_control(x); }, cfg.nominal_x0,
      cfg.tuning.horizon, cfg.tuning.dt);
  Trajectory shaped_traj = rollout(
      cfg.system, [&](const Eigen::VectorXd& x) { return sol.shaped_control(result.theta, x); },
      cfg.nominal_x0, cfg.tuning.horizon, cfg.tuning.dt);
  write_trajectory_csv(dir / "rollout_nominal.csv", nominal_traj);
  write_trajectory_csv(dir / "rollout_shaped.csv", shaped_traj);

  RunSummary summary;
  add_resolved_config(summary, cfg, seed);
  summary.add("tuning.iterations", static_cast<int>(result.history.size()) - 1);
  summary.add("tuning.L_initial", result.history.front().L);
  summary.add("tuning.L_final", result.history.back().L);
  summary.add("tuning.theta_norm", result.theta.norm());
  summary.add("shaping.residual_rms", sol.residual_rms());
  auto [min_mbar, min_h] = nonneg_minima(sol, cfg, result.theta);
  summary.add("shaping.min_mbar_on_grid", min_mbar);
  summary.add("shaping.min_h_on_grid", min_h);
  if (min_mbar < 0.0 || min_h < 0.0)
    std::cerr << "warning: tuned mbar/h take negative values on the check grid (min mbar="
              << min_mbar << ", min h=" << min_h << ")\n";

  double peak_nominal = nominal_traj.states.col(cfg.penalty.component).cwiseAbs().maxCoeff();
  double peak_shaped = shaped_traj.states.col(cfg.penalty.component).cwiseAbs().maxCoeff();
  summary.add("compare.peak_nominal", peak_nominal);
  summary.add("compare.peak_shaped", peak_shaped);

  auto report =
      lyapunov_decrease_check(sol, result.theta, cfg.nominal_x0, cfg.tuning.horizon, cfg.tuning.dt);
  summary.add("stability.max_lyapunov_increase", report.max_lyapunov_increase);
  summary.add("stability.terminal_norm", report.terminal_norm);
  summary.add("stability.verdict", report.verdict);
  summary.write(dir / "summary.txt");
  std::cout << "tuning stage written to " << dir.string() << " (L " << result.history.front().L
            << " -> " << result.history.back().L << ")\n";
  return 0;
}

void write_report(const fs::path& path, const std::string& name, const StabilityReport& report) {
  RunSummary summary;
  summary.add("check", name);
  summary.add("max_lyapunov_increase", report.max_lyapunov_increase);
  summary.add("terminal_norm", report.terminal_norm);
  summary.add("sup_state_norm", report.sup_state_norm);
  summary.add("diverged", report.diverged);
  summary.add("verdict", report.verdict);
  summary.write(path);
}

int cmd_verify(const std::string& config_path, const std::string& theta_path,
               const std::string& out_dir, std::uint64_t seed) {
  RunConfig cfg = load_run_config(config_path, seed);
  if (!fs::exists(theta_path))
    throw std::runtime_error("theta artifact not found: " + theta_path);
  Eigen::VectorXd theta = read_vector(theta_path);

  NominalArtifacts art = solve_nominal(cfg);
  ShapingSolution sol = build_shaping(cfg, art.phi0);
  if (theta.size() != sol.q_dim())
    throw std::runtime_error("theta artifact has wrong dimension for the configured basis");

  fs::path dir = fs::path(out_dir) / "verify";
  fs::create_directories(dir);

  bool all_ok = true;
  auto lyap = lyapunov_decrease_check(sol, theta, cfg.nominal_x0, cfg.tuning.horizon,
                                      cfg.tuning.dt);
  write_report(dir / "lyapunov.txt", "lyapunov_decrease", lyap);
  write_trajectory_csv(dir / "lyapunov_traj.csv", lyap.trajectory);
  all_ok = all_ok && lyap.verdict;

  for (double eps : cfg.verify_epsilons) {
    auto report =
        gain_scaling_check(sol, theta, eps, cfg.nominal_x0, cfg.verify_horizon, cfg.tuning.dt);
    std::string tag = "gain_eps_" + format_double(eps);
    write_report(dir / (tag + ".txt"), "gain_scaling", report);
    write_trajectory_csv(dir / (tag + "_traj.csv"), report.trajectory);
    all_ok = all_ok && report.verdict;
  }

  const double amp = cfg.iss_amplitude, until = cfg.iss_active_until;
  auto disturbance = [amp, until, p = cfg.system.p](double t) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(p);
    if (t <= until) v[0] = amp * std::sin(t);
    return v;
  };
  auto iss = iss_check(sol, theta, disturbance, cfg.nominal_x0, cfg.iss_horizon, cfg.tuning.dt);
  write_report(dir / "iss.txt", "iss", iss);
  write_trajectory_csv(dir / "iss_traj.csv", iss.trajectory);
  all_ok = all_ok && iss.verdict;

  std::cout << "verify stage written to " << dir.string() << (all_ok ? " (all checks passed)" : "")
            << "\n";
  return all_ok ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"performance index shaping toolkit"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "out", theta_path;
  std::uint64_t seed = 0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "config file (TOML)")->required();
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--seed", seed, "seed for sampled initial conditions");
  };
  auto* nominal = app.add_subcommand("nominal", "solve the nominal optimal control problem");
  add_common(nominal);
  auto* tune = app.add_subcommand("tune", "solve shaping and tune theta by gradient descent");
  add_common(tune);
  auto* verify = app.add_subcommand("verify", "run stability checks for a tuned theta");
  add_common(verify);
  verify->add_option("--theta", theta_path, "tuned theta artifact")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (nominal->parsed()) return cmd_nominal(config_path, out_dir, seed);
    if (tune->parsed()) return cmd_tune(config_path, out_dir, seed);
    if (verify->parsed()) return cmd_verify(config_path, theta_path, out_dir, seed);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
