#include "opdg/examples.hpp"
#include "opdg/linalg.hpp"
#include "opdg/simulate.hpp"
#include "opdg/wtdo.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace opdg;

namespace {

// One state, one input, B' P x = x.
std::pair<LqGame, NeSolution> identity_signal_game() {
  LqGame g = test::scalar_game(-1.0, 1.0, 1.0, 1.0);
  NeSolution ne;
  ne.P = {test::m1(1.0)};
  ne.K = {test::m1(1.0)};
  return {g, ne};
}

Trajectory samples(std::initializer_list<double> xs) {
  Trajectory t;
  t.x.resize(static_cast<Eigen::Index>(xs.size()), 1);
  Eigen::Index k = 0;
  for (double v : xs) t.x(k++, 0) = v;
  t.u = -t.x;
  return t;
}

struct Example2 {
  LqGame game = example_game("example2");
  NeSolution ne = solve_coupled_are(game);
  double horizon = default_horizon(closed_loop(game, ne.K));
  Trajectory traj = simulate_closed_loop(game, ne.K, horizon);
};

const Example2& example2() {
  static const Example2 e;
  return e;
}

}  // namespace

TEST(Crossings, SingleSignChange) {
  const auto [g, ne] = identity_signal_game();
  const auto c = extract_crossings(g, ne, samples({1.0, 0.5, -0.5, -1.0}));
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c[0].sign_plus, -1);
  EXPECT_EQ(c[0].player, 0);
  EXPECT_EQ(c[0].channel, 0);
  EXPECT_DOUBLE_EQ(c[0].x_minus(0), 0.5);
  EXPECT_DOUBLE_EQ(c[0].x_plus(0), -0.5);
  EXPECT_NEAR(c[0].t_plus - c[0].t_minus, kDefaultStep, 1e-15);
}

TEST(Crossings, ConstantSignIsEmpty) {
  const auto [g, ne] = identity_signal_game();
  EXPECT_TRUE(extract_crossings(g, ne, samples({1.0, 0.5, 0.2, 0.1})).empty());
}

TEST(Crossings, ChatterDropped) {
  const auto [g, ne] = identity_signal_game();
  EXPECT_EQ(extract_crossings(g, ne, samples({1.0, 1e-9, -1e-9, 1e-9, 0.5})).size(), 0u);
}

TEST(Crossings, MatchFinerSimulation) {
  const Example2& e = example2();
  const auto coarse = extract_crossings(e.game, e.ne, e.traj);
  ASSERT_FALSE(coarse.empty());
  const Trajectory fine = simulate_closed_loop(e.game, e.ne.K, e.horizon, kDefaultStep / 10.0);
  const auto dense = extract_crossings(e.game, e.ne, fine);
  for (const auto& c : coarse) {
    bool matched = false;
    for (const auto& d : dense)
      if (d.player == c.player && d.channel == c.channel && d.t_plus >= c.t_minus - 1e-12 &&
          d.t_plus <= c.t_plus + 1e-12)
        matched = true;
    EXPECT_TRUE(matched) << "crossing at " << c.t_plus;
  }
}

TEST(Wtdo, Example2NoiseFree) {
  const Example2& e = example2();
  const auto crossings = extract_crossings(e.game, e.ne, e.traj);
  const WtdoResult r = solve_wtdo(e.game, e.ne, crossings);
  const PotentialFunction& p = r.potential;
  EXPECT_EQ(p.method, MethodTag::kWtdo);
  EXPECT_GE(linalg::min_eigenvalue(p.Rp), 1.0 - 1e-6);
  EXPECT_GE(linalg::min_eigenvalue(p.Qp), -1e-6);
  EXPECT_GE(linalg::min_eigenvalue(p.Pp), -1e-6);
  const MatrixXd B = stack_input_matrix(e.game.dynamics);
  EXPECT_LT(linalg::max_abs(B.transpose() * p.Pp - p.Rp * e.ne.stacked_gain()), 1e-6);
  EXPECT_NEAR(r.eta, wtdo_eta(e.game, e.ne, p), 1e-12);
  EXPECT_LT(std::abs(r.eta), 1e-5);

  // Sign agreement at every constraint sample.
  for (const auto& c : crossings) {
    const VectorXd b = e.game.B(c.player).col(c.channel);
    for (const VectorXd* x : {&c.x_minus, &c.x_plus}) {
      const double pot = b.dot(p.Pp * *x);
      const double orig = b.dot(e.ne.P[c.player] * *x);
      EXPECT_GE(pot * orig, 0.0);
    }
  }

  const AreSolution are = solve_single_are(e.game.A(), B, p.Qp, p.Rp);
  const Trajectory pt = simulate_stacked(e.game, are.K, e.horizon);
  EXPECT_LE(trajectory_error(pt, e.traj).value, 0.01);
}

TEST(Wtdo, EmptyCrossingListSolves) {
  const Example2& e = example2();
  const WtdoResult r = solve_wtdo(e.game, e.ne, {});
  EXPECT_EQ(r.crossings, 0);
  EXPECT_LT(std::abs(r.eta), 1e-5);
}

TEST(Wtdo, ContradictoryCrossingsInfeasible) {
  const Example2& e = example2();
  auto crossings = extract_crossings(e.game, e.ne, e.traj);
  ASSERT_FALSE(crossings.empty());
  CrossingPoint flipped = crossings.front();
  flipped.sign_plus = -flipped.sign_plus;
  crossings.push_back(flipped);
  EXPECT_THROW(solve_wtdo(e.game, e.ne, crossings), InfeasibleWtdo);
}

TEST(Wtdo, FeasibleWhereTfoIs) {
  const LqGame g = test::single_player_game();
  const NeSolution ne = solve_coupled_are(g);
  const Trajectory t = simulate_closed_loop(g, ne.K, 8.0);
  const WtdoResult r = solve_wtdo(g, ne, extract_crossings(g, ne, t));
  EXPECT_LT(std::abs(r.eta), 1e-5);
}
