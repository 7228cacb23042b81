#ifndef PIS_VERIFY_HPP
#define PIS_VERIFY_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "pis/shaping.hpp"
#include "pis/simulate.hpp"

namespace pis {

/// Numerical spot-check of a stability claim over one rollout. The verdict
/// covers the checked envelope only, never a universal statement.
struct StabilityReport {
  double max_lyapunov_increase = 0.0;  // max over k of phi_p(x_{k+1}) - phi_p(x_k)
  double terminal_norm = 0.0;
  double sup_state_norm = 0.0;
  bool diverged = false;
  bool verdict = false;
  Trajectory trajectory;
};

namespace detail {

inline StabilityReport report_from_rollout(const ShapingSolution& sol,
                                           const Eigen::VectorXd& theta,
                                           const Controller& controller,
                                           const Eigen::VectorXd& x0, double horizon, double dt,
                                           const Disturbance& disturbance,
                                           double lyap_tol, double terminal_tol) {
  StabilityReport report;
  try {
    report.trajectory =
        rollout(sol.problem().system, controller, x0, horizon, dt, disturbance);
  } catch (const SimulationError&) {
    report.diverged = true;
    report.verdict = false;
    return report;
  }
  const Trajectory& traj = report.trajectory;
  double prev = sol.phi_p(theta, traj.state(0));
  double max_inc = 0.0, sup_norm = traj.state(0).norm();
  for (int k = 1; k <= traj.steps(); ++k) {
    Eigen::VectorXd x = traj.state(k);
    double v = sol.phi_p(theta, x);
    max_inc = std::max(max_inc, v - prev);
    sup_norm = std::max(sup_norm, x.norm());
    prev = v;
  }
  report.max_lyapunov_increase = max_inc;
  report.sup_state_norm = sup_norm;
  report.terminal_norm = traj.state(traj.steps()).norm();
  report.verdict = max_inc < lyap_tol && report.terminal_norm < terminal_tol;
  return report;
}

}  // namespace detail

/// Rolls out the shaped closed loop and checks that phi_p decreases along it.
inline StabilityReport lyapunov_decrease_check(const ShapingSolution& sol,
                                               const Eigen::VectorXd& theta,
                                               const Eigen::VectorXd& x0, double horizon,
                                               double dt, double lyap_tol = 1e-6,
                                               double terminal_tol = 0.05) {
  return detail::report_from_rollout(
      sol, theta, [&](const Eigen::VectorXd& x) { return sol.shaped_control(theta, x); }, x0,
      horizon, dt, nullptr, lyap_tol, terminal_tol);
}

/// Rolls out with the scaled law (1/2 + epsilon) u_p*. For the gain-scaled
/// loop phi_p is no longer exactly monotone at epsilon != 1/2, so only the
/// terminal norm enters the verdict.
inline StabilityReport gain_scaling_check(const ShapingSolution& sol, const Eigen::VectorXd& theta,
                                          double epsilon, const Eigen::VectorXd& x0,
                                          double horizon, double dt,
                                          double terminal_tol = 0.1) {
  if (epsilon <= 0.0) throw std::invalid_argument("gain_scaling_check: epsilon must be positive");
  const double factor = 0.5 + epsilon;
  StabilityReport report = detail::report_from_rollout(
      sol, theta,
      [&](const Eigen::VectorXd& x) -> Eigen::VectorXd {
        return factor * sol.shaped_control(theta, x);
      },
      x0, horizon, dt, nullptr, std::numeric_limits<double>::infinity(), terminal_tol);
  report.verdict = !report.diverged && report.terminal_norm < terminal_tol;
  return report;
}

/// Rolls out with a matched-channel disturbance, xdot = F_cl(x) + g(x) v(t).
/// Checks boundedness under forcing and reconvergence after the disturbance
/// window; the ISS comparison functions themselves are not constructed.
inline StabilityReport iss_check(const ShapingSolution& sol, const Eigen::VectorXd& theta,
                                 const Disturbance& disturbance, const Eigen::VectorXd& x0,
                                 double horizon, double dt, double sup_bound = 100.0,
                                 double terminal_tol = 0.05) {
  StabilityReport report = detail::report_from_rollout(
      sol, theta, [&](const Eigen::VectorXd& x) { return sol.shaped_control(theta, x); }, x0,
      horizon, dt, disturbance, std::numeric_limits<double>::infinity(), terminal_tol);
  report.verdict =
      !report.diverged && report.sup_state_norm < sup_bound && report.terminal_norm < terminal_tol;
  return report;
}

}  // namespace pis

#endif  // PIS_VERIFY_HPP
