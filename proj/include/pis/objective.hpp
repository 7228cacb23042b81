#ifndef PIS_OBJECTIVE_HPP
#define PIS_OBJECTIVE_HPP

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "pis/simulate.hpp"

namespace pis {

/// Overflow-safe softplus log(1+exp(a)).
inline double softplus(double a) {
  if (a > 0.0) return a + std::log1p(std::exp(-a));
  return std::log1p(std::exp(a));
}

inline double logistic(double a) {
  if (a >= 0.0) return 1.0 / (1.0 + std::exp(-a));
  double e = std::exp(a);
  return e / (1.0 + e);
}

enum class AggregationMode { Sum, Mean };

/// Trajectory-level overshoot penalty on one state component:
///   L = sum_k dt * (softplus(beta*(x_c(t_k) - threshold)) - log 2) / beta.
/// The -log 2 offset keeps L = 0 for a trajectory pinned at the threshold.
struct OvershootPenalty {
  int component = 0;
  double threshold = 0.0;
  double beta = 10.0;

  double evaluate(const Trajectory& traj) const {
    check(traj);
    const double log2 = std::log(2.0);
    double L = 0.0;
    for (int k = 0; k <= traj.steps(); ++k) {
      const double a = beta * (traj.states(k, component) - threshold);
      L += traj.dt * (softplus(a) - log2) / beta;
    }
    return L;
  }

  /// Per-grid-point gradient dL/dx(t_k): only the penalized component is
  /// nonzero, equal to dt * sigma(beta*(x_c - threshold)).
  std::vector<Eigen::VectorXd> state_gradient(const Trajectory& traj) const {
    check(traj);
    const int n = static_cast<int>(traj.states.cols());
    std::vector<Eigen::VectorXd> grads(traj.steps() + 1, Eigen::VectorXd::Zero(n));
    for (int k = 0; k <= traj.steps(); ++k) {
      const double a = beta * (traj.states(k, component) - threshold);
      grads[k][component] = traj.dt * logistic(a);
    }
    return grads;
  }

 private:
  void check(const Trajectory& traj) const {
    if (traj.states.rows() == 0) throw std::invalid_argument("OvershootPenalty: empty trajectory");
    if (component < 0 || component >= traj.states.cols())
      throw std::invalid_argument("OvershootPenalty: component out of range");
    if (beta <= 0.0) throw std::invalid_argument("OvershootPenalty: beta must be positive");
  }
};

inline double aggregate_objective(const OvershootPenalty& penalty,
                                  const std::vector<Trajectory>& trajs,
                                  AggregationMode mode = AggregationMode::Sum) {
  if (trajs.empty()) throw std::invalid_argument("aggregate_objective: empty trajectory list");
  double total = 0.0;
  for (const auto& traj : trajs) total += penalty.evaluate(traj);
  if (mode == AggregationMode::Mean) total /= static_cast<double>(trajs.size());
  return total;
}

}  // namespace pis

#endif  // PIS_OBJECTIVE_HPP
