#ifndef PIS_SHAPING_HPP
#define PIS_SHAPING_HPP

#include <Eigen/Dense>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pis/dynamics.hpp"
#include "pis/nominal.hpp"
#include "pis/polybasis.hpp"

namespace pis {

/// Collocation setup for the shaping condition
///   grad(h)' (f - 1/2 g R^-1 g' grad(phi0)) = -mbar,
/// with mbar(x,theta) = psi_m(x)' theta and h(x,theta) = psi_h(x)' c(theta).
struct ShapingProblem {
  ControlAffineSystem system;
  ControlWeight weight;
  ValueFunction phi0;
  EvenPolyBasis basis_m;  // theta lives here (q_dim terms)
  EvenPolyBasis basis_h;  // h coefficients live here (N terms)
  Eigen::VectorXd domain_lower;
  Eigen::VectorXd domain_upper;
  int sample_count = 2000;
};

/// Nominal closed-loop vector field f - 1/2 g R^-1 g' grad(phi0).
inline Eigen::VectorXd nominal_closed_loop_field(const ValueFunction& phi0,
                                                 const ControlAffineSystem& sys,
                                                 const ControlWeight& weight,
                                                 const Eigen::VectorXd& x) {
  if (x.size() != sys.n)
    throw std::invalid_argument("nominal_closed_loop_field: dimension mismatch");
  Eigen::MatrixXd gx = sys.g(x);
  return sys.f(x) - 0.5 * gx * weight.R_inv * gx.transpose() * phi0.gradient(x);
}

/// Collocation matrices: A_mat[k,i] = grad(psi_h_i)(x_k)' F_cl(x_k),
/// B_mat[k,j] = psi_m_j(x_k), at Halton samples x_k over the domain box.
inline std::pair<Eigen::MatrixXd, Eigen::MatrixXd> assemble_collocation(
    const ShapingProblem& problem) {
  const int N = problem.basis_h.size();
  const int q_dim = problem.basis_m.size();
  const int K = problem.sample_count;
  if (K < N)
    throw std::invalid_argument("assemble_collocation: underdetermined system (K < N)");

  auto samples = halton_box(problem.domain_lower, problem.domain_upper, K);
  Eigen::MatrixXd A_mat(K, N), B_mat(K, q_dim);
  for (int k = 0; k < K; ++k) {
    const Eigen::VectorXd& x = samples[k];
    Eigen::VectorXd field =
        nominal_closed_loop_field(problem.phi0, problem.system, problem.weight, x);
    A_mat.row(k) = (problem.basis_h.eval_gradients(x).transpose() * field).transpose();
    B_mat.row(k) = problem.basis_m.eval(x).transpose();
  }
  return {A_mat, B_mat};
}

/// Linear map theta -> c from the collocation least squares, plus the shaped
/// value function phi_p = phi0 + h and control law. Precomputing M makes
/// dc/dtheta exact, which is what keeps the tuning loop single-level.
class ShapingSolution {
 public:
  ShapingSolution(ShapingProblem problem, Eigen::MatrixXd M, double residual_rms)
      : problem_(std::make_shared<ShapingProblem>(std::move(problem))),
        M_(std::move(M)),
        residual_rms_(residual_rms) {}

  const ShapingProblem& problem() const { return *problem_; }
  const Eigen::MatrixXd& M() const { return M_; }
  double residual_rms() const { return residual_rms_; }
  int q_dim() const { return problem_->basis_m.size(); }

  Eigen::VectorXd h_coeffs(const Eigen::VectorXd& theta) const { return M_ * theta; }

  double mbar(const Eigen::VectorXd& theta, const Eigen::VectorXd& x) const {
    return problem_->basis_m.eval(x).dot(theta);
  }

  std::pair<double, Eigen::VectorXd> h_value_grad(const Eigen::VectorXd& theta,
                                                  const Eigen::VectorXd& x) const {
    Eigen::VectorXd c = M_ * theta;
    return {problem_->basis_h.eval(x).dot(c), problem_->basis_h.eval_gradients(x) * c};
  }

  Eigen::MatrixXd h_hessian(const Eigen::VectorXd& theta, const Eigen::VectorXd& x) const {
    return problem_->basis_h.eval_combination_hessian(M_ * theta, x);
  }

  double phi_p(const Eigen::VectorXd& theta, const Eigen::VectorXd& x) const {
    return problem_->phi0.value(x) + h_value_grad(theta, x).first;
  }

  Eigen::VectorXd phi_p_gradient(const Eigen::VectorXd& theta, const Eigen::VectorXd& x) const {
    return problem_->phi0.gradient(x) + h_value_grad(theta, x).second;
  }

  Eigen::MatrixXd phi_p_hessian(const Eigen::VectorXd& theta, const Eigen::VectorXd& x) const {
    return problem_->phi0.hessian(x) + h_hessian(theta, x);
  }

  /// Shaped law u_p*(x) = -1/2 R^-1 g(x)' (grad(phi0) + grad(h)).
  Eigen::VectorXd shaped_control(const Eigen::VectorXd& theta, const Eigen::VectorXd& x) const {
    return -0.5 * problem_->weight.R_inv * problem_->system.g(x).transpose() *
           phi_p_gradient(theta, x);
  }

  Eigen::VectorXd nominal_control(const Eigen::VectorXd& x) const {
    return -0.5 * problem_->weight.R_inv * problem_->system.g(x).transpose() *
           problem_->phi0.gradient(x);
  }

  /// Effective added cost v = mbar + 1/4 |R^-1 g' grad(h)|_R^2.
  /// Returns (v, mbar term, quadratic deviation term).
  struct AddedCost {
    double v;
    double mbar_term;
    double deviation_term;
  };
  AddedCost effective_added_cost(const Eigen::VectorXd& theta, const Eigen::VectorXd& x) const {
    AddedCost out;
    out.mbar_term = mbar(theta, x);
    Eigen::VectorXd gh = h_value_grad(theta, x).second;
    Eigen::VectorXd z = problem_->weight.R_inv * problem_->system.g(x).transpose() * gh;
    out.deviation_term = 0.25 * z.dot(problem_->weight.R * z);
    out.v = out.mbar_term + out.deviation_term;
    return out;
  }

  /// Algebraic check of the shaped HJB identity: the residual of phi_p under
  /// cost m0+v minus the residual of phi0 under m0 minus
  /// [grad(h)'F_cl + mbar] is identically zero, independent of collocation
  /// error.
  double theorem1_identity_residual(const Eigen::VectorXd& theta, const Eigen::VectorXd& x,
                                    const StateCost& cost) const {
    const auto& sys = problem_->system;
    const auto& weight = problem_->weight;
    Eigen::MatrixXd gx = sys.g(x);
    Eigen::VectorXd fx = sys.f(x);

    Eigen::VectorXd grad_p = phi_p_gradient(theta, x);
    Eigen::VectorXd gg_p = gx.transpose() * grad_p;
    double shaped_res = grad_p.dot(fx) - 0.25 * gg_p.dot(weight.R_inv * gg_p) +
                        cost.evaluate(x) + effective_added_cost(theta, x).v;

    Eigen::VectorXd grad_0 = problem_->phi0.gradient(x);
    Eigen::VectorXd gg_0 = gx.transpose() * grad_0;
    double nominal_res =
        grad_0.dot(fx) - 0.25 * gg_0.dot(weight.R_inv * gg_0) + cost.evaluate(x);

    Eigen::VectorXd field = fx - 0.5 * gx * weight.R_inv * gg_0;
    double transport = h_value_grad(theta, x).second.dot(field) + mbar(theta, x);
    return shaped_res - nominal_res - transport;
  }

 private:
  std::shared_ptr<ShapingProblem> problem_;
  Eigen::MatrixXd M_;
  double residual_rms_;
};

/// HJB residual of the shaped pair (phi_p, m0+v) evaluated directly.
inline double shaped_hjb_residual(const ShapingSolution& sol, const Eigen::VectorXd& theta,
                                  const StateCost& cost, const Eigen::VectorXd& x) {
  const auto& sys = sol.problem().system;
  const auto& weight = sol.problem().weight;
  Eigen::VectorXd grad = sol.phi_p_gradient(theta, x);
  Eigen::MatrixXd gx = sys.g(x);
  Eigen::VectorXd gg = gx.transpose() * grad;
  double m = cost.evaluate(x) + sol.effective_added_cost(theta, x).v;
  return grad.dot(sys.f(x)) - 0.25 * gg.dot(weight.R_inv * gg) + m;
}

struct RankDeficiencyError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Solves the collocation least squares for the linear map M with
/// c(theta) = M theta, so that sum_i c_i grad(psi_i)'F_cl ~ -mbar at the
/// samples. residual_rms is the per-unit-theta RMS collocation residual.
inline ShapingSolution solve_shaping(const ShapingProblem& problem, double ridge = 1e-10) {
  auto [A_mat, B_mat] = assemble_collocation(problem);
  if (!A_mat.allFinite() || !B_mat.allFinite())
    throw std::runtime_error("solve_shaping: non-finite collocation matrices");

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A_mat);
  const double thresh = svd.singularValues()[0] * 1e-12 * std::max(A_mat.rows(), A_mat.cols());
  int rank = 0;
  for (int i = 0; i < svd.singularValues().size(); ++i)
    if (svd.singularValues()[i] > thresh) ++rank;
  if (rank < problem.basis_h.size()) {
    std::string msg = "solve_shaping: collocation matrix rank " + std::to_string(rank) +
                      " below basis size " + std::to_string(problem.basis_h.size()) +
                      "; trailing singular values:";
    for (int i = rank; i < svd.singularValues().size(); ++i)
      msg += " " + std::to_string(svd.singularValues()[i]);
    throw RankDeficiencyError(msg);
  }

  Eigen::MatrixXd M = -ridge_solve(A_mat, B_mat, ridge);
  Eigen::MatrixXd residual = A_mat * M + B_mat;  // K x q_dim
  // RMS over samples, worst column (each column is a unit-theta direction).
  double worst = 0.0;
  for (int j = 0; j < residual.cols(); ++j)
    worst = std::max(worst, residual.col(j).norm() / std::sqrt(double(residual.rows())));
  return ShapingSolution(problem, std::move(M), worst);
}

}  // namespace pis

#endif  // PIS_SHAPING_HPP
