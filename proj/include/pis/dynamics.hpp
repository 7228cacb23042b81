#ifndef PIS_DYNAMICS_HPP
#define PIS_DYNAMICS_HPP

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

namespace pis {

/// Control-affine system xdot = f(x) + g(x) u with analytic Jacobians.
/// dg_dx returns one n x n Jacobian per input column of g.
struct ControlAffineSystem {
  int n = 0;
  int p = 0;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> f;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> g;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> df_dx;
  std::function<std::vector<Eigen::MatrixXd>(const Eigen::VectorXd&)> dg_dx;

  Eigen::VectorXd evaluate(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const {
    if (x.size() != n || u.size() != p)
      throw std::invalid_argument("ControlAffineSystem::evaluate: dimension mismatch");
    return f(x) + g(x) * u;
  }
};

struct Linearization {
  Eigen::MatrixXd A0;
  Eigen::MatrixXd B0;
  int controllability_rank = 0;
  int observability_rank = 0;
  bool controllable = false;
  bool observable = false;
};

/// Linearization at the origin plus controllability/observability ranks.
/// Rank deficiency is reported, not thrown: the caller decides whether the
/// stabilizability assumptions are actually violated.
inline Linearization linearize(const ControlAffineSystem& sys,
                               const Eigen::MatrixXd& Q = Eigen::MatrixXd()) {
  Linearization lin;
  Eigen::VectorXd origin = Eigen::VectorXd::Zero(sys.n);
  lin.A0 = sys.df_dx(origin);
  lin.B0 = sys.g(origin);

  Eigen::MatrixXd ctrb(sys.n, sys.n * sys.p);
  Eigen::MatrixXd block = lin.B0;
  for (int k = 0; k < sys.n; ++k) {
    ctrb.middleCols(k * sys.p, sys.p) = block;
    block = lin.A0 * block;
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu_c(ctrb);
  lin.controllability_rank = static_cast<int>(lu_c.rank());
  lin.controllable = lin.controllability_rank == sys.n;

  if (Q.size() > 0) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Q);
    Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0);
    Eigen::MatrixXd Qsqrt =
        es.eigenvectors() * ev.cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
    Eigen::MatrixXd obsv(sys.n * sys.n, sys.n);
    Eigen::MatrixXd rowblk = Qsqrt;
    for (int k = 0; k < sys.n; ++k) {
      obsv.middleRows(k * sys.n, sys.n) = rowblk;
      rowblk = rowblk * lin.A0;
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu_o(obsv);
    lin.observability_rank = static_cast<int>(lu_o.rank());
    lin.observable = lin.observability_rank == sys.n;
  }
  return lin;
}

/// Linear time-invariant system xdot = A x + B u as a ControlAffineSystem.
inline ControlAffineSystem make_linear_system(const Eigen::MatrixXd& A,
                                              const Eigen::MatrixXd& B) {
  ControlAffineSystem sys;
  sys.n = static_cast<int>(A.rows());
  sys.p = static_cast<int>(B.cols());
  sys.f = [A](const Eigen::VectorXd& x) -> Eigen::VectorXd { return A * x; };
  sys.g = [B](const Eigen::VectorXd&) -> Eigen::MatrixXd { return B; };
  sys.df_dx = [A](const Eigen::VectorXd&) -> Eigen::MatrixXd { return A; };
  int n = sys.n, p = sys.p;
  sys.dg_dx = [n, p](const Eigen::VectorXd&) {
    return std::vector<Eigen::MatrixXd>(p, Eigen::MatrixXd::Zero(n, n));
  };
  return sys;
}

/// Third-order underdamped oscillator benchmark: a mass-spring-damper block
/// with natural frequency omega_n and damping ratio zeta, coupled to one
/// extra first-order state.
inline ControlAffineSystem make_lti3(double omega_n = 2.0, double zeta = 0.1) {
  Eigen::MatrixXd A(3, 3);
  A << 0.0, 1.0, 0.0,
      -omega_n * omega_n, -2.0 * zeta * omega_n, 1.0,
      0.0, 1.0, -1.0;
  Eigen::MatrixXd B(3, 1);
  B << 0.0, 1.0, 0.0;
  return make_linear_system(A, B);
}

struct CartPoleParams {
  double m_c = 1.0;   // cart mass [kg]
  double m_p = 0.1;   // pole mass [kg]
  double l = 0.5;     // pole length [m]
  double grav = 9.81; // gravity [m/s^2]
};

/// Cart-pole about the upright equilibrium.
/// State [p, xi, v, w]: cart position, pendulum angle, cart velocity,
/// angular velocity. Input: horizontal force on the cart.
inline ControlAffineSystem make_cartpole(const CartPoleParams& prm = CartPoleParams()) {
  if (prm.m_c <= 0.0 || prm.l <= 0.0)
    throw std::invalid_argument("make_cartpole: m_c and l must be positive");
  ControlAffineSystem sys;
  sys.n = 4;
  sys.p = 1;

  const double mc = prm.m_c, mp = prm.m_p, l = prm.l, G = prm.grav;

  sys.f = [=](const Eigen::VectorXd& x) -> Eigen::VectorXd {
    const double xi = x[1], v = x[2], w = x[3];
    const double s = std::sin(xi), c = std::cos(xi);
    const double den = mc + mp * s * s;
    Eigen::VectorXd dx(4);
    dx[0] = v;
    dx[1] = w;
    dx[2] = mp * s * (l * w * w - G * c) / den;
    dx[3] = (mp * l * w * w * c * s - (mc + mp) * G * s) / (l * den);
    return dx;
  };

  sys.g = [=](const Eigen::VectorXd& x) -> Eigen::MatrixXd {
    const double xi = x[1];
    const double s = std::sin(xi), c = std::cos(xi);
    const double den = mc + mp * s * s;
    Eigen::MatrixXd gx(4, 1);
    gx << 0.0, 0.0, 1.0 / den, c / (l * den);
    return gx;
  };

  sys.df_dx = [=](const Eigen::VectorXd& x) -> Eigen::MatrixXd {
    const double xi = x[1], w = x[3];
    const double s = std::sin(xi), c = std::cos(xi);
    const double den = mc + mp * s * s;
    const double dden = 2.0 * mp * s * c;
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(4, 4);
    J(0, 2) = 1.0;
    J(1, 3) = 1.0;
    // f3 = mp*s*(l*w^2 - G*c)/den
    const double n3 = mp * s * (l * w * w - G * c);
    J(2, 1) = (mp * c * (l * w * w - G * c) + mp * s * G * s) / den - n3 * dden / (den * den);
    J(2, 3) = 2.0 * mp * s * l * w / den;
    // f4 = (mp*l*w^2*c*s - (mc+mp)*G*s)/(l*den)
    const double n4 = mp * l * w * w * c * s - (mc + mp) * G * s;
    const double cos2 = c * c - s * s;
    J(3, 1) = (mp * l * w * w * cos2 - (mc + mp) * G * c) / (l * den) -
              n4 * dden / (l * den * den);
    J(3, 3) = 2.0 * mp * w * c * s / den;
    return J;
  };

  sys.dg_dx = [=](const Eigen::VectorXd& x) {
    const double xi = x[1];
    const double s = std::sin(xi), c = std::cos(xi);
    const double den = mc + mp * s * s;
    const double dden = 2.0 * mp * s * c;
    std::vector<Eigen::MatrixXd> dg(1, Eigen::MatrixXd::Zero(4, 4));
    dg[0](2, 1) = -dden / (den * den);
    dg[0](3, 1) = (-s * den - c * dden) / (l * den * den);
    return dg;
  };

  return sys;
}

}  // namespace pis

#endif  // PIS_DYNAMICS_HPP
