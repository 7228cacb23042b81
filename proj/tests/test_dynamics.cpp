#include "doctest.h"
#include "pis/dynamics.hpp"
#include "test_util.hpp"

using namespace pis;

namespace {

// Finite-difference consistency of the supplied analytic Jacobians.
void check_jacobians(const ControlAffineSystem& sys, double scale) {
  const double eps = 1e-6;
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::VectorXd x = pis_test::random_vector(sys.n, scale);
    Eigen::MatrixXd J = sys.df_dx(x);
    auto dg = sys.dg_dx(x);
    for (int j = 0; j < sys.n; ++j) {
      Eigen::VectorXd xp = x, xm = x;
      xp[j] += eps;
      xm[j] -= eps;
      Eigen::VectorXd fd = (sys.f(xp) - sys.f(xm)) / (2 * eps);
      for (int i = 0; i < sys.n; ++i) {
        double s = std::max(1.0, std::abs(fd[i]));
        CHECK(std::abs(J(i, j) - fd[i]) / s < 1e-5);
      }
      Eigen::MatrixXd gd = (sys.g(xp) - sys.g(xm)) / (2 * eps);
      for (int c = 0; c < sys.p; ++c)
        for (int i = 0; i < sys.n; ++i) {
          double s = std::max(1.0, std::abs(gd(i, c)));
          CHECK(std::abs(dg[c](i, j) - gd(i, c)) / s < 1e-5);
        }
    }
  }
}

}  // namespace

TEST_CASE("lti3 matches its state-space display") {
  auto sys = make_lti3();
  Eigen::VectorXd x(3);
  x << -5.0, 0.0, 0.0;
  Eigen::VectorXd u = Eigen::VectorXd::Zero(1);
  Eigen::VectorXd rate = sys.evaluate(x, u);
  CHECK(rate[0] == doctest::Approx(0.0));
  CHECK(rate[1] == doctest::Approx(20.0));  // -omega_n^2 * (-5)
  CHECK(rate[2] == doctest::Approx(0.0));

  auto lin = linearize(sys, Eigen::MatrixXd::Identity(3, 3));
  CHECK((lin.A0 - sys.df_dx(x)).norm() == 0.0);
  CHECK(lin.controllable);
  CHECK(lin.observable);
}

TEST_CASE("equilibrium is preserved") {
  auto cart = make_cartpole();
  Eigen::VectorXd x0 = Eigen::VectorXd::Zero(4);
  CHECK(cart.f(x0).norm() == 0.0);
  CHECK(cart.evaluate(x0, Eigen::VectorXd::Zero(1)).norm() == 0.0);
  CHECK(make_lti3().f(Eigen::VectorXd::Zero(3)).norm() == 0.0);
}

TEST_CASE("cartpole input channel at the origin") {
  CartPoleParams prm;
  auto cart = make_cartpole(prm);
  Eigen::VectorXd u(1);
  u << 1.0;
  Eigen::VectorXd rate = cart.evaluate(Eigen::VectorXd::Zero(4), u);
  CHECK(rate[0] == doctest::Approx(0.0));
  CHECK(rate[1] == doctest::Approx(0.0));
  CHECK(rate[2] == doctest::Approx(1.0 / prm.m_c));
  CHECK(rate[3] == doctest::Approx(1.0 / (prm.l * prm.m_c)));
}

TEST_CASE("cartpole linearization") {
  CartPoleParams prm;
  auto cart = make_cartpole(prm);
  auto lin = linearize(cart, Eigen::MatrixXd::Identity(4, 4));
  CHECK(lin.B0(2, 0) == doctest::Approx(1.0 / prm.m_c));
  CHECK(lin.B0(3, 0) == doctest::Approx(1.0 / (prm.l * prm.m_c)));
  CHECK(lin.A0(3, 1) == doctest::Approx(-(prm.m_c + prm.m_p) * prm.grav / (prm.l * prm.m_c)));
  CHECK(lin.controllable);
  CHECK(lin.observable);
}

TEST_CASE("analytic Jacobians match finite differences") {
  check_jacobians(make_lti3(), 3.0);
  check_jacobians(make_cartpole(), 1.0);
}

TEST_CASE("dimension mismatch is rejected") {
  auto sys = make_lti3();
  CHECK_THROWS_AS(sys.evaluate(Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(1)),
                  std::invalid_argument);
  CHECK_THROWS_AS(sys.evaluate(Eigen::VectorXd::Zero(3), Eigen::VectorXd::Zero(2)),
                  std::invalid_argument);
}
