#ifndef PIS_POLYBASIS_HPP
#define PIS_POLYBASIS_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace pis {

// Multi-index of monomial exponents. Only even total degrees >= 2 are used.
struct MultiIndex {
  std::vector<int> exponents;

  int degree() const {
    int d = 0;
    for (int e : exponents) d += e;
    return d;
  }
};

/// Ordered set of even-degree monomials in n variables, degrees 2..max_degree,
/// graded-lexicographic order. The ordering is fixed so coefficient vectors
/// have a stable layout across runs and file formats.
class EvenPolyBasis {
 public:
  EvenPolyBasis() = default;

  EvenPolyBasis(int n_vars, int max_degree)
      : n_vars_(n_vars), max_degree_(max_degree) {
    if (n_vars < 1) throw std::invalid_argument("EvenPolyBasis: n_vars must be >= 1");
    if (max_degree < 2 || max_degree % 2 != 0)
      throw std::invalid_argument("EvenPolyBasis: max_degree must be even and >= 2");
    for (int d = 2; d <= max_degree; d += 2) enumerate_degree(d);
  }

  int n_vars() const { return n_vars_; }
  int max_degree() const { return max_degree_; }
  int size() const { return static_cast<int>(terms_.size()); }
  const std::vector<MultiIndex>& terms() const { return terms_; }

  /// Evaluates all basis monomials at x. values[i] = psi_i(x).
  Eigen::VectorXd eval(const Eigen::VectorXd& x) const {
    check_dim(x);
    Eigen::VectorXd values(size());
    for (int i = 0; i < size(); ++i) {
      double v = 1.0;
      for (int j = 0; j < n_vars_; ++j) v *= ipow(x[j], terms_[i].exponents[j]);
      values[i] = v;
    }
    return values;
  }

  /// Gradients of all terms, column i = grad psi_i(x). Shape n_vars x N.
  Eigen::MatrixXd eval_gradients(const Eigen::VectorXd& x) const {
    check_dim(x);
    Eigen::MatrixXd grads(n_vars_, size());
    for (int i = 0; i < size(); ++i) {
      const auto& a = terms_[i].exponents;
      for (int j = 0; j < n_vars_; ++j) {
        if (a[j] == 0) {
          grads(j, i) = 0.0;
          continue;
        }
        double v = a[j] * ipow(x[j], a[j] - 1);
        for (int k = 0; k < n_vars_; ++k)
          if (k != j) v *= ipow(x[k], a[k]);
        grads(j, i) = v;
      }
    }
    return grads;
  }

  /// Hessian of term i at x, n_vars x n_vars.
  Eigen::MatrixXd eval_hessian(int i, const Eigen::VectorXd& x) const {
    check_dim(x);
    const auto& a = terms_[i].exponents;
    Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(n_vars_, n_vars_);
    for (int j = 0; j < n_vars_; ++j) {
      for (int k = j; k < n_vars_; ++k) {
        double v;
        if (j == k) {
          if (a[j] < 2) continue;
          v = a[j] * (a[j] - 1) * ipow(x[j], a[j] - 2);
          for (int m = 0; m < n_vars_; ++m)
            if (m != j) v *= ipow(x[m], a[m]);
        } else {
          if (a[j] == 0 || a[k] == 0) continue;
          v = a[j] * a[k] * ipow(x[j], a[j] - 1) * ipow(x[k], a[k] - 1);
          for (int m = 0; m < n_vars_; ++m)
            if (m != j && m != k) v *= ipow(x[m], a[m]);
        }
        hess(j, k) = v;
        hess(k, j) = v;
      }
    }
    return hess;
  }

  /// Hessian of the linear combination sum_i c_i psi_i at x.
  Eigen::MatrixXd eval_combination_hessian(const Eigen::VectorXd& coeffs,
                                           const Eigen::VectorXd& x) const {
    if (coeffs.size() != size())
      throw std::invalid_argument("EvenPolyBasis: coefficient length mismatch");
    Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(n_vars_, n_vars_);
    for (int i = 0; i < size(); ++i) {
      if (coeffs[i] == 0.0) continue;
      hess += coeffs[i] * eval_hessian(i, x);
    }
    return hess;
  }

 private:
  void check_dim(const Eigen::VectorXd& x) const {
    if (x.size() != n_vars_)
      throw std::invalid_argument("EvenPolyBasis: state dimension mismatch");
  }

  static double ipow(double base, int e) {
    double r = 1.0;
    while (e-- > 0) r *= base;
    return r;
  }

  // Lex-descending within one total degree: first variable's exponent
  // decreases outermost.
  void enumerate_degree(int degree) {
    std::vector<int> exps(n_vars_, 0);
    enumerate_rec(degree, 0, exps);
  }

  void enumerate_rec(int remaining, int pos, std::vector<int>& exps) {
    if (pos == n_vars_ - 1) {
      exps[pos] = remaining;
      terms_.push_back(MultiIndex{exps});
      return;
    }
    for (int e = remaining; e >= 0; --e) {
      exps[pos] = e;
      enumerate_rec(remaining - e, pos + 1, exps);
      exps[pos] = 0;
    }
  }

  int n_vars_ = 0;
  int max_degree_ = 0;
  std::vector<MultiIndex> terms_;
};

inline EvenPolyBasis enumerate_even_monomials(int n_vars, int max_degree) {
  return EvenPolyBasis(n_vars, max_degree);
}

}  // namespace pis

#endif  // PIS_POLYBASIS_HPP
