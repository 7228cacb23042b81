#ifndef PIS_SIMULATE_HPP
#define PIS_SIMULATE_HPP

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>

#include "pis/dynamics.hpp"

namespace pis {

using Controller = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
using Disturbance = std::function<Eigen::VectorXd(double)>;

struct SimulationError : std::runtime_error {
  double time;
  SimulationError(const std::string& what, double t)
      : std::runtime_error(what + " at t=" + std::to_string(t)), time(t) {}
};

/// Time-gridded closed-loop trajectory. states has T_steps+1 rows; inputs has
/// T_steps rows, row k being the input logged at t_k.
struct Trajectory {
  double dt = 0.0;
  Eigen::MatrixXd states;  // (T+1) x n
  Eigen::MatrixXd inputs;  // T x p

  int steps() const { return static_cast<int>(inputs.rows()); }
  double time(int k) const { return k * dt; }
  Eigen::VectorXd state(int k) const { return states.row(k).transpose(); }
};

constexpr double kDefaultBlowupNorm = 1e6;

/// One classical RK4 step of xdot = f(x) + g(x)(u(x) + v(t)).
/// The feedback law is re-evaluated at every internal stage; there is no
/// zero-order hold.
inline Eigen::VectorXd rk4_step(const ControlAffineSystem& sys, const Controller& controller,
                                const Eigen::VectorXd& x, double dt,
                                const Disturbance& disturbance = nullptr, double t = 0.0) {
  if (dt <= 0.0) throw std::invalid_argument("rk4_step: dt must be positive");
  auto rate = [&](const Eigen::VectorXd& xs, double ts) -> Eigen::VectorXd {
    Eigen::VectorXd u = controller(xs);
    if (disturbance) u += disturbance(ts);
    return sys.f(xs) + sys.g(xs) * u;
  };
  Eigen::VectorXd k1 = rate(x, t);
  Eigen::VectorXd k2 = rate(x + 0.5 * dt * k1, t + 0.5 * dt);
  Eigen::VectorXd k3 = rate(x + 0.5 * dt * k2, t + 0.5 * dt);
  Eigen::VectorXd k4 = rate(x + dt * k3, t + dt);
  Eigen::VectorXd next = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  if (!next.allFinite()) throw SimulationError("rk4_step: non-finite state", t + dt);
  return next;
}

/// Closed-loop rollout on a fixed grid. Diverging states (norm above
/// blowup_norm) terminate with a SimulationError carrying the time stamp.
inline Trajectory rollout(const ControlAffineSystem& sys, const Controller& controller,
                          const Eigen::VectorXd& x0, double horizon, double dt,
                          const Disturbance& disturbance = nullptr,
                          double blowup_norm = kDefaultBlowupNorm) {
  if (horizon <= 0.0 || dt <= 0.0)
    throw std::invalid_argument("rollout: horizon and dt must be positive");
  if (x0.size() != sys.n) throw std::invalid_argument("rollout: x0 dimension mismatch");
  const int T = static_cast<int>(std::llround(horizon / dt));

  Trajectory traj;
  traj.dt = dt;
  traj.states.resize(T + 1, sys.n);
  traj.inputs.resize(T, sys.p);

  Eigen::VectorXd x = x0;
  traj.states.row(0) = x.transpose();
  for (int k = 0; k < T; ++k) {
    const double t = k * dt;
    Eigen::VectorXd u = controller(x);
    if (disturbance) u += disturbance(t);
    traj.inputs.row(k) = u.transpose();
    x = rk4_step(sys, controller, x, dt, disturbance, t);
    if (x.norm() > blowup_norm)
      throw SimulationError("rollout: state norm exceeded blow-up bound", (k + 1) * dt);
    traj.states.row(k + 1) = x.transpose();
  }
  return traj;
}

}  // namespace pis

#endif  // PIS_SIMULATE_HPP
