#include "doctest.h"
#include "pis/shaping.hpp"
#include "pis/simulate.hpp"
#include "test_util.hpp"

using namespace pis;

namespace {

// Scalar integrator xdot = u with Q = R = 1: P = 1, nominal closure -x.
ShapingProblem scalar_toy(int K = 100) {
  Eigen::MatrixXd A(1, 1), B(1, 1);
  A << 0.0;
  B << 1.0;
  ShapingProblem prob{make_linear_system(A, B),
                      ControlWeight(Eigen::MatrixXd::Identity(1, 1)),
                      ValueFunction::quadratic(Eigen::MatrixXd::Identity(1, 1)),
                      enumerate_even_monomials(1, 2),
                      enumerate_even_monomials(1, 2),
                      Eigen::VectorXd::Constant(1, -1.0),
                      Eigen::VectorXd::Constant(1, 1.0),
                      K};
  return prob;
}

struct Lti3Fixture {
  ControlAffineSystem sys = make_lti3();
  StateCost cost{Eigen::MatrixXd::Identity(3, 3), std::nullopt, {}};
  ControlWeight weight{Eigen::MatrixXd::Identity(1, 1)};
  ValueFunction phi0;
  ShapingSolution solution;

  static Lti3Fixture make() {
    ControlAffineSystem sys = make_lti3();
    auto lin = linearize(sys);
    StateCost cost{Eigen::MatrixXd::Identity(3, 3), std::nullopt, {}};
    ControlWeight weight(Eigen::MatrixXd::Identity(1, 1));
    ValueFunction phi0 = solve_care(lin.A0, lin.B0, cost, weight);
    ShapingProblem prob{sys,
                        weight,
                        phi0,
                        enumerate_even_monomials(3, 4),
                        enumerate_even_monomials(3, 4),
                        Eigen::VectorXd::Constant(3, -5.0),
                        Eigen::VectorXd::Constant(3, 5.0),
                        2000};
    return Lti3Fixture{sys, cost, weight, phi0, solve_shaping(prob)};
  }
};

}  // namespace

TEST_CASE("nominal closed-loop field") {
  auto fix = Lti3Fixture::make();
  CHECK(nominal_closed_loop_field(fix.phi0, fix.sys, fix.weight, Eigen::VectorXd::Zero(3)).norm() ==
        0.0);
  auto lin = linearize(fix.sys);
  Eigen::MatrixXd K = fix.weight.R_inv * lin.B0.transpose() * fix.phi0.P();
  Eigen::MatrixXd Acl = lin.A0 - lin.B0 * K;
  for (int trial = 0; trial < 10; ++trial) {
    Eigen::VectorXd x = pis_test::random_vector(3, 4.0);
    Eigen::VectorXd field = nominal_closed_loop_field(fix.phi0, fix.sys, fix.weight, x);
    CHECK((field - Acl * x).norm() < 1e-10 * std::max(1.0, x.norm()));
  }
}

TEST_CASE("collocation matrices match hand expansion on the toy") {
  auto prob = scalar_toy(50);
  auto [A_mat, B_mat] = assemble_collocation(prob);
  CHECK(A_mat.rows() == 50);
  CHECK(A_mat.cols() == 1);
  CHECK(B_mat.cols() == 1);
  auto samples = halton_box(prob.domain_lower, prob.domain_upper, 50);
  for (int k = 0; k < 50; ++k) {
    double x = samples[k][0];
    CHECK(A_mat(k, 0) == doctest::Approx(-2.0 * x * x).epsilon(1e-12));
    CHECK(B_mat(k, 0) == doctest::Approx(x * x).epsilon(1e-12));
  }
}

TEST_CASE("underdetermined collocation is rejected") {
  auto prob = scalar_toy(0);
  CHECK_THROWS_AS(assemble_collocation(prob), std::invalid_argument);
}

TEST_CASE("toy shaping recovers c = theta/2 exactly") {
  auto sol = solve_shaping(scalar_toy());
  Eigen::VectorXd theta(1);
  theta << 3.0;
  CHECK(sol.h_coeffs(theta)[0] == doctest::Approx(1.5).epsilon(1e-12));
  CHECK(sol.h_coeffs(Eigen::VectorXd::Zero(1)).norm() == 0.0);
  // Doubling theta doubles c.
  CHECK(sol.h_coeffs(2.0 * theta)[0] == doctest::Approx(2.0 * sol.h_coeffs(theta)[0]));
  CHECK(sol.residual_rms() < 1e-9);
}

TEST_CASE("toy shaped HJB residual is exact") {
  auto sol = solve_shaping(scalar_toy());
  StateCost cost{Eigen::MatrixXd::Identity(1, 1), std::nullopt, {}};
  Eigen::VectorXd theta(1);
  theta << 2.0;
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::VectorXd x = pis_test::random_vector(1, 1.0);
    CHECK(std::abs(shaped_hjb_residual(sol, theta, cost, x)) < 1e-10);
  }
  // And the theorem identity is exact as well.
  Eigen::VectorXd x(1);
  x << 0.7;
  CHECK(std::abs(sol.theorem1_identity_residual(theta, x, cost)) < 1e-12);
}

TEST_CASE("linearity of the shaping map") {
  auto fix = Lti3Fixture::make();
  const int q = fix.solution.q_dim();
  Eigen::VectorXd t1 = pis_test::random_vector(q), t2 = pis_test::random_vector(q);
  Eigen::VectorXd lhs = fix.solution.h_coeffs(0.3 * t1 + 1.7 * t2);
  Eigen::VectorXd rhs = 0.3 * fix.solution.h_coeffs(t1) + 1.7 * fix.solution.h_coeffs(t2);
  CHECK((lhs - rhs).norm() < 1e-12 * std::max(1.0, rhs.norm()));
}

TEST_CASE("theta = 0 gives the nominal law and zero h") {
  auto fix = Lti3Fixture::make();
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(fix.solution.q_dim());
  for (int trial = 0; trial < 10; ++trial) {
    Eigen::VectorXd x = pis_test::random_vector(3, 4.0);
    auto [h, gh] = fix.solution.h_value_grad(theta, x);
    CHECK(h == 0.0);
    CHECK(gh.norm() == 0.0);
    CHECK((fix.solution.shaped_control(theta, x) - fix.solution.nominal_control(x)).norm() == 0.0);
    CHECK(fix.solution.effective_added_cost(theta, x).v == 0.0);
  }
}

TEST_CASE("h gradient matches finite differences") {
  auto fix = Lti3Fixture::make();
  Eigen::VectorXd theta = 0.01 * pis_test::random_vector(fix.solution.q_dim());
  const double eps = 1e-5;
  for (int trial = 0; trial < 5; ++trial) {
    Eigen::VectorXd x = pis_test::random_vector(3, 3.0);
    Eigen::VectorXd grad = fix.solution.h_value_grad(theta, x).second;
    for (int j = 0; j < 3; ++j) {
      Eigen::VectorXd xp = x, xm = x;
      xp[j] += eps;
      xm[j] -= eps;
      double fd = (fix.solution.h_value_grad(theta, xp).first -
                   fix.solution.h_value_grad(theta, xm).first) /
                  (2 * eps);
      CHECK(grad[j] == doctest::Approx(fd).epsilon(1e-6));
    }
  }
  // h and its gradient vanish at the origin.
  auto [h0, gh0] = fix.solution.h_value_grad(theta, Eigen::VectorXd::Zero(3));
  CHECK(h0 == 0.0);
  CHECK(gh0.norm() == 0.0);
}

TEST_CASE("added-cost quadratic term equals the control deviation norm") {
  auto fix = Lti3Fixture::make();
  Eigen::VectorXd theta = 0.05 * pis_test::random_vector(fix.solution.q_dim());
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::VectorXd x = pis_test::random_vector(3, 4.0);
    auto cost_parts = fix.solution.effective_added_cost(theta, x);
    Eigen::VectorXd du =
        fix.solution.shaped_control(theta, x) - fix.solution.nominal_control(x);
    double dev = du.dot(fix.weight.R * du);
    double scale = std::max(1e-30, std::abs(dev));
    CHECK(std::abs(cost_parts.deviation_term - dev) / scale < 1e-10);
  }
  CHECK(fix.solution.effective_added_cost(theta, Eigen::VectorXd::Zero(3)).v == 0.0);
}

TEST_CASE("theorem 1 identity holds at random (x, theta) pairs") {
  auto fix = Lti3Fixture::make();
  for (int trial = 0; trial < 1000; ++trial) {
    Eigen::VectorXd x = pis_test::random_vector(3, 5.0);
    Eigen::VectorXd theta = pis_test::random_vector(fix.solution.q_dim(), 0.1);
    CHECK(std::abs(fix.solution.theorem1_identity_residual(theta, x, fix.cost)) < 1e-9);
  }
  Eigen::VectorXd x = pis_test::random_vector(3, 5.0);
  CHECK(fix.solution.theorem1_identity_residual(Eigen::VectorXd::Zero(fix.solution.q_dim()), x,
                                                fix.cost) == 0.0);
}

TEST_CASE("shaped rollout decreases phi_p") {
  auto fix = Lti3Fixture::make();
  Eigen::VectorXd theta = 0.02 * Eigen::VectorXd::Ones(fix.solution.q_dim());
  Eigen::VectorXd x0(3);
  x0 << -5.0, 0.0, 0.0;
  Trajectory traj = rollout(
      fix.sys, [&](const Eigen::VectorXd& x) { return fix.solution.shaped_control(theta, x); },
      x0, 15.0, 0.01);
  double prev = fix.solution.phi_p(theta, traj.state(0));
  for (int k = 1; k <= traj.steps(); ++k) {
    double v = fix.solution.phi_p(theta, traj.state(k));
    CHECK(v <= prev + 1e-6);
    prev = v;
  }
}
