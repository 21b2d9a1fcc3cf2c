#pragma once

#include "opdg/game.hpp"

#include <vector>

namespace opdg::test {

inline MatrixXd m1(double v) { return MatrixXd::Constant(1, 1, v); }

/// One player, x' = a x + b u, cost q x^2 + r u^2.
inline LqGame scalar_game(double a, double b, double q, double r, double x0 = 1.0) {
  LqGame g;
  g.dynamics.A = m1(a);
  g.dynamics.B = {m1(b)};
  g.costs = {PlayerCost{m1(q), {m1(r)}}};
  g.x0 = VectorXd::Constant(1, x0);
  return g;
}

/// Two players with identical costs: J_1 = J_2 = x'Qx + u_1'R u_1 + u_2'R u_2.
inline LqGame symmetric_game() {
  LqGame g;
  g.dynamics.A.resize(2, 2);
  g.dynamics.A << 0.2, 1.0, -0.5, -0.3;
  MatrixXd B1(2, 1), B2(2, 1);
  B1 << 1.0, 0.0;
  B2 << 0.3, 1.0;
  g.dynamics.B = {B1, B2};
  MatrixXd Q(2, 2);
  Q << 2.0, 0.3, 0.3, 1.0;
  g.costs = {PlayerCost{Q, {m1(1.0), m1(1.0)}}, PlayerCost{Q, {m1(1.0), m1(1.0)}}};
  g.x0 = VectorXd(2);
  g.x0 << 1.0, -1.5;
  return g;
}

/// One player, two states, controllable, open-loop unstable.
inline LqGame single_player_game() {
  LqGame g;
  g.dynamics.A.resize(2, 2);
  g.dynamics.A << 0.3, 1.0, 0.0, -1.0;
  MatrixXd B(2, 1);
  B << 0.0, 1.0;
  g.dynamics.B = {B};
  g.costs = {PlayerCost{MatrixXd::Identity(2, 2), {m1(1.0)}}};
  g.x0 = VectorXd(2);
  g.x0 << 1.0, -0.5;
  return g;
}

}  // namespace opdg::test
