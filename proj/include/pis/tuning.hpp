#ifndef PIS_TUNING_HPP
#define PIS_TUNING_HPP

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "pis/objective.hpp"
#include "pis/shaping.hpp"
#include "pis/simulate.hpp"

namespace pis {

/// Per-grid-point state sensitivities S(t_k) = dx(t_k)/dtheta, n x q_dim.
struct SensitivityTrajectory {
  double dt = 0.0;
  std::vector<Eigen::MatrixXd> S;
};

enum class StepRule { Fixed, Normalized, Backtracking };

struct TuningConfig {
  double gamma = 0.05;
  int max_iter = 50;
  double grad_tol = 1e-8;
  std::vector<Eigen::VectorXd> initial_conditions;
  double dt = 0.01;
  double horizon = 15.0;
  StepRule step_rule = StepRule::Normalized;
  AggregationMode mode = AggregationMode::Sum;
  double blowup_norm = kDefaultBlowupNorm;
};

struct TuningRecord {
  int iter;
  double L;
  double grad_norm;
  double step;
};

/// du*/dtheta = -1/2 R^-1 g(x)' Psi_h'(x) M. Independent of theta since h is
/// linear in theta.
inline Eigen::MatrixXd control_sensitivity(const ShapingSolution& sol, const Eigen::VectorXd& x) {
  const auto& prob = sol.problem();
  return -0.5 * prob.weight.R_inv * prob.system.g(x).transpose() *
         prob.basis_h.eval_gradients(x) * sol.M();
}

/// du*/dx of the shaped feedback law, assembled from analytic Hessians:
/// with w = g' grad(phi_p), row j of dw/dx is grad(phi_p)' dg_j/dx + g_j' hess(phi_p),
/// and du*/dx = -1/2 R^-1 dw/dx.
inline Eigen::MatrixXd control_state_jacobian(const ShapingSolution& sol,
                                              const Eigen::VectorXd& theta,
                                              const Eigen::VectorXd& x) {
  const auto& prob = sol.problem();
  const int n = prob.system.n, p = prob.system.p;
  Eigen::MatrixXd gx = prob.system.g(x);
  auto dg = prob.system.dg_dx(x);
  Eigen::VectorXd grad_p = sol.phi_p_gradient(theta, x);
  Eigen::MatrixXd hess_p = sol.phi_p_hessian(theta, x);
  Eigen::MatrixXd dw(p, n);
  for (int j = 0; j < p; ++j)
    dw.row(j) = grad_p.transpose() * dg[j] + gx.col(j).transpose() * hess_p;
  return -0.5 * prob.weight.R_inv * dw;
}

/// Integrates the closed-loop variational ODE
///   Sdot = [df/dx + sum_j dg_j/dx u*_j + g du*/dx] S + g du*/dtheta,
/// S(0)=0, jointly with the state on one augmented RK4 grid so that both see
/// identical stage evaluations. The supplied trajectory fixes x0, dt, and the
/// step count; the recomputed states coincide with it bit for bit.
inline SensitivityTrajectory propagate_sensitivity(const ControlAffineSystem& sys,
                                                   const ShapingSolution& sol,
                                                   const Eigen::VectorXd& theta,
                                                   const Trajectory& traj) {
  const int n = sys.n;
  const int q = sol.q_dim();
  const int T = traj.steps();

  SensitivityTrajectory out;
  out.dt = traj.dt;
  out.S.reserve(T + 1);

  auto state_rate = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd {
    return sys.f(x) + sys.g(x) * sol.shaped_control(theta, x);
  };
  auto sens_rate = [&](const Eigen::VectorXd& x, const Eigen::MatrixXd& S) -> Eigen::MatrixXd {
    Eigen::MatrixXd gx = sys.g(x);
    auto dg = sys.dg_dx(x);
    Eigen::VectorXd u = sol.shaped_control(theta, x);
    Eigen::MatrixXd A_cl = sys.df_dx(x);
    for (int j = 0; j < sys.p; ++j) A_cl += dg[j] * u[j];
    A_cl += gx * control_state_jacobian(sol, theta, x);
    return A_cl * S + gx * control_sensitivity(sol, x);
  };

  Eigen::VectorXd x = traj.state(0);
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(n, q);
  out.S.push_back(S);
  const double dt = traj.dt;
  for (int k = 0; k < T; ++k) {
    Eigen::VectorXd k1x = state_rate(x);
    Eigen::MatrixXd k1s = sens_rate(x, S);
    Eigen::VectorXd x2 = x + 0.5 * dt * k1x;
    Eigen::VectorXd k2x = state_rate(x2);
    Eigen::MatrixXd k2s = sens_rate(x2, S + 0.5 * dt * k1s);
    Eigen::VectorXd x3 = x + 0.5 * dt * k2x;
    Eigen::VectorXd k3x = state_rate(x3);
    Eigen::MatrixXd k3s = sens_rate(x3, S + 0.5 * dt * k2s);
    Eigen::VectorXd x4 = x + dt * k3x;
    Eigen::VectorXd k4x = state_rate(x4);
    Eigen::MatrixXd k4s = sens_rate(x4, S + dt * k3s);
    x += (dt / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
    S += (dt / 6.0) * (k1s + 2.0 * k2s + 2.0 * k3s + k4s);
    if (!S.allFinite())
      throw SimulationError("propagate_sensitivity: non-finite sensitivity", (k + 1) * dt);
    out.S.push_back(S);
  }
  return out;
}

/// dL/dtheta = sum_i sum_k (dL/dx(t_k))' S_i(t_k), rolling out the shaped
/// closed loop and its sensitivity for each initial condition.
inline Eigen::VectorXd total_gradient(const OvershootPenalty& penalty, const ShapingSolution& sol,
                                      const Eigen::VectorXd& theta, const TuningConfig& config) {
  const auto& sys = sol.problem().system;
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(sol.q_dim());
  for (const auto& x0 : config.initial_conditions) {
    Trajectory traj;
    try {
      traj = rollout(
          sys, [&](const Eigen::VectorXd& x) { return sol.shaped_control(theta, x); }, x0,
          config.horizon, config.dt, nullptr, config.blowup_norm);
    } catch (const SimulationError& e) {
      throw SimulationError(std::string("total_gradient: divergent rollout from x0=[") +
                                std::to_string(x0[0]) + ", ...]; " + e.what(),
                            e.time);
    }
    SensitivityTrajectory sens = propagate_sensitivity(sys, sol, theta, traj);
    auto dLdx = penalty.state_gradient(traj);
    for (int k = 0; k <= traj.steps(); ++k) grad += sens.S[k].transpose() * dLdx[k];
  }
  if (config.mode == AggregationMode::Mean)
    grad /= static_cast<double>(config.initial_conditions.size());
  return grad;
}

inline double tuning_objective(const OvershootPenalty& penalty, const ShapingSolution& sol,
                               const Eigen::VectorXd& theta, const TuningConfig& config) {
  std::vector<Trajectory> trajs;
  trajs.reserve(config.initial_conditions.size());
  for (const auto& x0 : config.initial_conditions)
    trajs.push_back(rollout(
        sol.problem().system, [&](const Eigen::VectorXd& x) { return sol.shaped_control(theta, x); },
        x0, config.horizon, config.dt, nullptr, config.blowup_norm));
  return aggregate_objective(penalty, trajs, config.mode);
}

/// Central-difference oracle for dL/dtheta; 2*q_dim full pipeline evaluations.
inline Eigen::VectorXd finite_difference_gradient(const OvershootPenalty& penalty,
                                                  const ShapingSolution& sol,
                                                  const Eigen::VectorXd& theta,
                                                  const TuningConfig& config, double eps = 1e-5) {
  if (eps <= 0.0) throw std::invalid_argument("finite_difference_gradient: eps must be positive");
  Eigen::VectorXd grad(sol.q_dim());
  for (int j = 0; j < sol.q_dim(); ++j) {
    Eigen::VectorXd tp = theta, tm = theta;
    tp[j] += eps;
    tm[j] -= eps;
    grad[j] = (tuning_objective(penalty, sol, tp, config) -
               tuning_objective(penalty, sol, tm, config)) /
              (2.0 * eps);
  }
  return grad;
}

struct TuningResult {
  Eigen::VectorXd theta;
  std::vector<TuningRecord> history;
};

/// Gradient descent theta_{k+1} = theta_k - gamma * dL/dtheta from theta_0 = 0.
/// Normalized and backtracking rules halve the step (Armijo c = 1e-4) until a
/// decrease is found or the step underflows; a divergent candidate rollout
/// counts as a failed step.
inline TuningResult gradient_descent(const ShapingSolution& sol, const OvershootPenalty& penalty,
                                     const TuningConfig& config,
                                     const Eigen::VectorXd& theta0 = Eigen::VectorXd()) {
  TuningResult result;
  result.theta = theta0.size() > 0 ? theta0 : Eigen::VectorXd::Zero(sol.q_dim());
  constexpr double armijo_c = 1e-4;
  constexpr double min_step = 1e-12;

  double L = tuning_objective(penalty, sol, result.theta, config);
  result.history.push_back({0, L, 0.0, 0.0});
  for (int it = 1; it <= config.max_iter; ++it) {
    Eigen::VectorXd grad = total_gradient(penalty, sol, result.theta, config);
    const double gnorm = grad.norm();
    if (gnorm < config.grad_tol) break;

    double step = config.gamma;
    Eigen::VectorXd direction = grad;
    double directional = gnorm * gnorm;
    if (config.step_rule == StepRule::Normalized) {
      direction /= gnorm;
      directional = gnorm;
    }

    if (config.step_rule == StepRule::Fixed) {
      result.theta -= step * direction;
      L = tuning_objective(penalty, sol, result.theta, config);
      result.history.push_back({it, L, gnorm, step});
      continue;
    }

    bool accepted = false;
    while (step >= min_step) {
      Eigen::VectorXd candidate = result.theta - step * direction;
      double L_new;
      try {
        L_new = tuning_objective(penalty, sol, candidate, config);
      } catch (const SimulationError&) {
        step *= 0.5;
        continue;
      }
      if (L_new <= L - armijo_c * step * directional) {
        result.theta = candidate;
        L = L_new;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    result.history.push_back({it, L, gnorm, accepted ? step : 0.0});
    if (!accepted) break;  // no descent step found; gradient is effectively stale
  }
  return result;
}

}  // namespace pis

#endif  // PIS_TUNING_HPP
