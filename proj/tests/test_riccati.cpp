#include "opdg/examples.hpp"
#include "opdg/linalg.hpp"
#include "opdg/riccati.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace opdg;
using test::m1;

TEST(SingleAre, ScalarUnitCase) {
  const AreSolution s = solve_single_are(m1(0.0), m1(1.0), m1(1.0), m1(1.0));
  EXPECT_NEAR(s.P(0, 0), 1.0, 1e-12);
  EXPECT_NEAR(s.K(0, 0), 1.0, 1e-12);
}

TEST(SingleAre, ScalarUnstableNoStateCost) {
  const AreSolution s = solve_single_are(m1(1.0), m1(1.0), m1(0.0), m1(1.0));
  EXPECT_NEAR(s.P(0, 0), 2.0, 1e-12);
  EXPECT_NEAR(s.K(0, 0), 2.0, 1e-12);
}

TEST(SingleAre, ResidualAndStability) {
  const LqGame g = example_game("example1");
  const MatrixXd B = stack_input_matrix(g.dynamics);
  const MatrixXd R = linalg::block_diag({g.R(0, 0), g.R(1, 1)});
  const AreSolution s = solve_single_are(g.A(), B, g.Q(0), R);
  EXPECT_LT(are_residual(g.A(), B, g.Q(0), R, s.P), kRiccatiTol);
  EXPECT_TRUE(linalg::is_hurwitz(g.A() - B * s.K));
  EXPECT_GE(linalg::min_eigenvalue(s.P), -1e-9);
}

class ScalingInvariance : public ::testing::TestWithParam<double> {};

TEST_P(ScalingInvariance, GainUnchangedValueScaled) {
  const double gamma = GetParam();
  const LqGame g = example_game("example1");
  const MatrixXd B = stack_input_matrix(g.dynamics);
  const MatrixXd R = linalg::block_diag({g.R(0, 0), g.R(1, 1)});
  const AreSolution base = solve_single_are(g.A(), B, g.Q(1), R);
  const AreSolution scaled = solve_single_are(g.A(), B, gamma * g.Q(1), gamma * R);
  EXPECT_LT(linalg::max_abs(scaled.K - base.K), 1e-6);
  EXPECT_LT(linalg::max_abs(scaled.P - gamma * base.P), 1e-6 * gamma * linalg::max_abs(base.P));
}

INSTANTIATE_TEST_SUITE_P(Gammas, ScalingInvariance, ::testing::Values(0.5, 2.0, 10.0));

TEST(SingleAre, NotStabilizableThrows) {
  MatrixXd A(2, 2);
  A << 1.0, 0.0, 0.0, 2.0;
  MatrixXd B(2, 1);
  B << 1.0, 0.0;
  EXPECT_THROW(solve_single_are(A, B, MatrixXd::Identity(2, 2), m1(1.0)), NotStabilizable);
}

TEST(CoupledAre, ExampleResidualsBelowTolerance) {
  for (const auto& name : example_names()) {
    const LqGame g = example_game(name);
    const NeSolution ne = solve_coupled_are(g);
    EXPECT_LT(ne.residual, kRiccatiTol) << name;
    for (double r : coupled_residuals(g, ne.P)) EXPECT_LT(r, kRiccatiTol) << name;
    EXPECT_LT(linalg::spectral_abscissa(closed_loop(g, ne.K)), 0.0) << name;
    for (int i = 0; i < g.players(); ++i) {
      const MatrixXd Ki = g.R(i, i).ldlt().solve(g.B(i).transpose() * ne.P[i]);
      EXPECT_LT(linalg::max_abs(Ki - ne.K[i]), 1e-9) << name;
    }
  }
}

TEST(CoupledAre, SinglePlayerMatchesSingleAre) {
  const LqGame g = test::single_player_game();
  const NeSolution ne = solve_coupled_are(g);
  const AreSolution s = solve_single_are(g.A(), g.B(0), g.Q(0), g.R(0, 0));
  EXPECT_LT(linalg::max_abs(ne.P[0] - s.P), 1e-12);
  EXPECT_LT(linalg::max_abs(ne.K[0] - s.K), 1e-12);
}

namespace {

// Symmetric scalar coupled equation with A = -1, B_i = 1, Q_i = 1, R_ii = 1,
// R_ij = 0 and P_1 = P_2 = p.
double symmetric_scalar_lhs(double p) { return 2.0 * -1.0 * p + 1.0 - 2.0 * (2.0 * p * p) + p * p; }

double grid_bisection_root() {
  double lo = 0.0, hi = 0.0;
  const int n = 10000;
  for (int k = 0; k < n; ++k) {
    const double a = 5.0 * k / n, b = 5.0 * (k + 1) / n;
    if (symmetric_scalar_lhs(a) * symmetric_scalar_lhs(b) <= 0.0) {
      lo = a;
      hi = b;
      break;
    }
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (symmetric_scalar_lhs(lo) * symmetric_scalar_lhs(mid) <= 0.0 ? hi : lo) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST(CoupledAre, ScalarTwoPlayerOracle) {
  LqGame g;
  g.dynamics.A = m1(-1.0);
  g.dynamics.B = {m1(1.0), m1(1.0)};
  g.costs = {PlayerCost{m1(1.0), {m1(1.0), m1(0.0)}}, PlayerCost{m1(1.0), {m1(0.0), m1(1.0)}}};
  g.x0 = VectorXd::Ones(1);
  const double oracle = grid_bisection_root();
  const NeSolution ne = solve_coupled_are(g);
  EXPECT_NEAR(ne.P[0](0, 0), oracle, 1e-9);
  EXPECT_NEAR(ne.P[1](0, 0), oracle, 1e-9);
  EXPECT_NEAR(oracle, 1.0 / 3.0, 1e-12);
}

TEST(CoupledAre, StackedGainOrder) {
  const LqGame g = example_game("example2");
  const NeSolution ne = solve_coupled_are(g);
  const MatrixXd K = ne.stacked_gain();
  EXPECT_EQ(K.row(0), ne.K[0].row(0));
  EXPECT_EQ(K.row(1), ne.K[1].row(0));
}
