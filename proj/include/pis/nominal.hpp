#ifndef PIS_NOMINAL_HPP
#define PIS_NOMINAL_HPP

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "pis/dynamics.hpp"
#include "pis/polybasis.hpp"

namespace pis {

/// State-cost integrand m0(x) = x'Qx + q(x), q an optional even polynomial.
struct StateCost {
  Eigen::MatrixXd Q;
  std::optional<EvenPolyBasis> q_basis;
  Eigen::VectorXd q_coeffs;

  double evaluate(const Eigen::VectorXd& x) const {
    double m = x.dot(Q * x);
    if (q_basis) m += q_basis->eval(x).dot(q_coeffs);
    return m;
  }

  Eigen::VectorXd gradient(const Eigen::VectorXd& x) const {
    Eigen::VectorXd g = 2.0 * Q * x;
    if (q_basis) g += q_basis->eval_gradients(x) * q_coeffs;
    return g;
  }
};

struct ControlWeight {
  Eigen::MatrixXd R;
  Eigen::MatrixXd R_inv;

  explicit ControlWeight(const Eigen::MatrixXd& R_in) : R(R_in) {
    if (R.rows() != R.cols()) throw std::invalid_argument("ControlWeight: R must be square");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(R);
    if (es.eigenvalues().minCoeff() <= 0.0)
      throw std::invalid_argument("ControlWeight: R must be positive definite");
    R_inv = R.inverse();
  }
};

/// Minimum performance index phi(x): quadratic x'Px or an even polynomial
/// over a basis. Provides value, gradient, and Hessian.
class ValueFunction {
 public:
  static ValueFunction quadratic(const Eigen::MatrixXd& P) {
    ValueFunction vf;
    vf.repr_ = Quadratic{P};
    return vf;
  }

  static ValueFunction polynomial(EvenPolyBasis basis, Eigen::VectorXd coeffs) {
    if (coeffs.size() != basis.size())
      throw std::invalid_argument("ValueFunction: coefficient length mismatch");
    ValueFunction vf;
    vf.repr_ = Polynomial{std::move(basis), std::move(coeffs)};
    return vf;
  }

  double value(const Eigen::VectorXd& x) const {
    if (auto* q = std::get_if<Quadratic>(&repr_)) return x.dot(q->P * x);
    const auto& p = std::get<Polynomial>(repr_);
    return p.basis.eval(x).dot(p.coeffs);
  }

  Eigen::VectorXd gradient(const Eigen::VectorXd& x) const {
    if (auto* q = std::get_if<Quadratic>(&repr_)) return 2.0 * q->P * x;
    const auto& p = std::get<Polynomial>(repr_);
    return p.basis.eval_gradients(x) * p.coeffs;
  }

  Eigen::MatrixXd hessian(const Eigen::VectorXd& x) const {
    if (auto* q = std::get_if<Quadratic>(&repr_)) return 2.0 * q->P;
    const auto& p = std::get<Polynomial>(repr_);
    return p.basis.eval_combination_hessian(p.coeffs, x);
  }

  bool is_quadratic() const { return std::holds_alternative<Quadratic>(repr_); }

  const Eigen::MatrixXd& P() const { return std::get<Quadratic>(repr_).P; }
  const EvenPolyBasis& basis() const { return std::get<Polynomial>(repr_).basis; }
  const Eigen::VectorXd& coeffs() const { return std::get<Polynomial>(repr_).coeffs; }

 private:
  struct Quadratic {
    Eigen::MatrixXd P;
  };
  struct Polynomial {
    EvenPolyBasis basis;
    Eigen::VectorXd coeffs;
  };
  std::variant<Quadratic, Polynomial> repr_;
};

struct SolverError : std::runtime_error {
  std::vector<double> residual_history;
  SolverError(const std::string& what, std::vector<double> hist = {})
      : std::runtime_error(what), residual_history(std::move(hist)) {}
};

inline Eigen::MatrixXd care_residual_matrix(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                                            const Eigen::MatrixXd& Q, const ControlWeight& weight,
                                            const Eigen::MatrixXd& P) {
  return A.transpose() * P + P * A + Q - P * B * weight.R_inv * B.transpose() * P;
}

/// Solves the CARE by integrating the differential Riccati flow
/// Pdot = A'P + PA + Q - P B R^-1 B' P from P(0)=0 until stationary.
/// Termination is certified by the algebraic residual, not the flow alone.
inline ValueFunction solve_care(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                                const StateCost& cost, const ControlWeight& weight,
                                double tol = 1e-8, double dt = 1e-3,
                                long max_steps = 2'000'000) {
  const int n = static_cast<int>(A.rows());
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(n, n);
  auto flow = [&](const Eigen::MatrixXd& Pk) {
    return care_residual_matrix(A, B, cost.Q, weight, Pk);
  };
  std::vector<double> hist;
  for (long step = 0; step < max_steps; ++step) {
    Eigen::MatrixXd k1 = flow(P);
    if (k1.norm() < 1e-12) break;
    Eigen::MatrixXd k2 = flow(P + 0.5 * dt * k1);
    Eigen::MatrixXd k3 = flow(P + 0.5 * dt * k2);
    Eigen::MatrixXd k4 = flow(P + dt * k3);
    P += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (step % 1000 == 0) hist.push_back(k1.norm());
    if (!P.allFinite()) throw SolverError("solve_care: Riccati flow diverged", hist);
  }
  P = 0.5 * (P + P.transpose());
  const double res = care_residual_matrix(A, B, cost.Q, weight, P).norm();
  if (res >= tol) {
    hist.push_back(res);
    throw SolverError("solve_care: residual " + std::to_string(res) + " above tolerance", hist);
  }
  return ValueFunction::quadratic(P);
}

inline Eigen::VectorXd lqr_control(const ValueFunction& phi, const Eigen::MatrixXd& B,
                                   const ControlWeight& weight, const Eigen::VectorXd& x) {
  return -weight.R_inv * B.transpose() * phi.P() * x;
}

/// Steady-state HJB residual
///   grad(phi)'f - 1/4 grad(phi)' g R^-1 g' grad(phi) + m(x).
inline double hjb_residual(const ValueFunction& phi, const ControlAffineSystem& sys,
                           const std::function<double(const Eigen::VectorXd&)>& m,
                           const ControlWeight& weight, const Eigen::VectorXd& x) {
  if (x.size() != sys.n) throw std::invalid_argument("hjb_residual: dimension mismatch");
  Eigen::VectorXd grad = phi.gradient(x);
  Eigen::MatrixXd gx = sys.g(x);
  Eigen::VectorXd gg = gx.transpose() * grad;
  return grad.dot(sys.f(x)) - 0.25 * gg.dot(weight.R_inv * gg) + m(x);
}

/// Deterministic low-discrepancy samples over a box via the Halton sequence.
inline std::vector<Eigen::VectorXd> halton_box(const Eigen::VectorXd& lower,
                                               const Eigen::VectorXd& upper, int count,
                                               int skip = 0) {
  static const int primes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29};
  const int n = static_cast<int>(lower.size());
  if (upper.size() != n) throw std::invalid_argument("halton_box: bound dimension mismatch");
  if (n > 10) throw std::invalid_argument("halton_box: dimension too large");
  std::vector<Eigen::VectorXd> pts;
  pts.reserve(count);
  for (int i = 0; i < count; ++i) {
    const int idx = i + 1 + skip;
    Eigen::VectorXd x(n);
    for (int j = 0; j < n; ++j) {
      const int base = primes[j];
      double u = 0.0, f = 1.0 / base;
      int k = idx;
      while (k > 0) {
        u += f * (k % base);
        k /= base;
        f /= base;
      }
      x[j] = lower[j] + u * (upper[j] - lower[j]);
    }
    pts.push_back(std::move(x));
  }
  return pts;
}

/// Ridge-regularized least squares for a tall system A z = b (column-wise).
inline Eigen::MatrixXd ridge_solve(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                                   double ridge = 1e-10) {
  Eigen::MatrixXd normal = A.transpose() * A;
  normal.diagonal().array() += ridge;
  return normal.ldlt().solve(A.transpose() * B);
}

struct PolicyIterationResult {
  ValueFunction phi;
  int iterations = 0;
  double validation_residual = 0.0;      // max |HJB residual| on validation grid
  std::vector<double> residual_history;  // per-iteration validation residual
};

/// Successive-approximation policy iteration over an even polynomial basis.
/// Each iteration solves the generalized HJB equation
///   grad(phi)'(f + g u_k) = -(m0 + |u_k|_R^2)
/// in least squares at Halton samples, then improves the policy. The initial
/// policy is the LQR law of the linearization.
inline PolicyIterationResult fit_nominal_policy_iteration(
    const ControlAffineSystem& sys, const StateCost& cost, const ControlWeight& weight,
    const EvenPolyBasis& basis, const Eigen::VectorXd& domain_lower,
    const Eigen::VectorXd& domain_upper, int sample_count = 2000, double tol = 1e-9,
    int max_iter = 30) {
  if (basis.n_vars() != sys.n)
    throw std::invalid_argument("fit_nominal_policy_iteration: basis dimension mismatch");

  Linearization lin = linearize(sys, cost.Q);
  ValueFunction phi_lqr = solve_care(lin.A0, lin.B0, cost, weight, 1e-8);
  const Eigen::MatrixXd K0 = weight.R_inv * lin.B0.transpose() * phi_lqr.P();

  auto samples = halton_box(domain_lower, domain_upper, sample_count);
  auto validation = halton_box(domain_lower, domain_upper, 500, sample_count);

  const int N = basis.size();
  Eigen::VectorXd coeffs = Eigen::VectorXd::Zero(N);

  // Current policy: LQR before the first value solve, then from coeffs.
  bool have_value = false;
  auto policy = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd {
    if (!have_value) return -K0 * x;
    Eigen::VectorXd grad = basis.eval_gradients(x) * coeffs;
    return -0.5 * weight.R_inv * sys.g(x).transpose() * grad;
  };

  auto validation_residual = [&]() {
    double worst = 0.0;
    ValueFunction phi = ValueFunction::polynomial(basis, coeffs);
    for (const auto& x : validation) {
      double r = hjb_residual(
          phi, sys, [&](const Eigen::VectorXd& xs) { return cost.evaluate(xs); }, weight, x);
      worst = std::max(worst, std::abs(r));
    }
    return worst;
  };

  PolicyIterationResult result;
  int rising = 0;
  for (int it = 0; it < max_iter; ++it) {
    Eigen::MatrixXd A_mat(static_cast<int>(samples.size()), N);
    Eigen::VectorXd b_vec(static_cast<int>(samples.size()));
    for (size_t k = 0; k < samples.size(); ++k) {
      const Eigen::VectorXd& x = samples[k];
      Eigen::VectorXd u = policy(x);
      Eigen::VectorXd field = sys.f(x) + sys.g(x) * u;
      A_mat.row(static_cast<int>(k)) = (basis.eval_gradients(x).transpose() * field).transpose();
      b_vec[static_cast<int>(k)] = -(cost.evaluate(x) + u.dot(weight.R * u));
    }
    Eigen::VectorXd new_coeffs = ridge_solve(A_mat, b_vec);
    const double change = (new_coeffs - coeffs).norm();
    coeffs = new_coeffs;
    have_value = true;
    result.iterations = it + 1;

    const double vres = validation_residual();
    // Plateau noise is not divergence; only count clear relative increases.
    if (!result.residual_history.empty() && vres > 1.01 * result.residual_history.back()) {
      if (++rising >= 3)
        throw SolverError("fit_nominal_policy_iteration: residual increased 3 iterations",
                          result.residual_history);
    } else {
      rising = 0;
    }
    result.residual_history.push_back(vres);
    if (it > 0 && change < tol) break;
  }
  result.validation_residual = result.residual_history.back();
  result.phi = ValueFunction::polynomial(basis, coeffs);
  return result;
}

}  // namespace pis

#endif  // PIS_NOMINAL_HPP
