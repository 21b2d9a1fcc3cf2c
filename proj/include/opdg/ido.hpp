#pragma once

#include "opdg/game.hpp"
#include "opdg/riccati.hpp"
#include "opdg/simulate.hpp"

#include <vector>

namespace opdg {

struct IdoConfig {
  int max_evals = 10000;
  double penalty_weight = 1e3;
  double initial_step = 0.25;  // Nelder-Mead simplex size in factor entries
  MatrixXd init_Qp;            // empty means identity
  MatrixXd init_Rp;
};

/// Trapezoid integral of |-K x(t) - u(t)|^2 over traj, K from the ARE of
/// (A, B, Qp, Rp). u is the recorded input of traj.
double input_error(const LqGame& game, const MatrixXd& Qp, const MatrixXd& Rp, const Trajectory& traj);

/// Sum over samples and channels of max(0, -[B_i' Pp x]_j [B_i' P_i x]_j).
double sign_hinge(const LqGame& game, const NeSolution& ne, const MatrixXd& Pp, const Trajectory& traj);

struct IdoResult {
  PotentialFunction potential;
  double e_u = 0.0;
  double hinge = 0.0;
  double objective = 0.0;  // normalized e_u plus weighted normalized hinge
  int evaluations = 0;
  bool converged = false;  // simplex collapsed before max_evals
  std::vector<double> history;  // best objective after each optimizer iteration
};

/// Input-matching identification: Nelder-Mead over Cholesky factors of
/// (Qp, Rp), solving the potential ARE exactly for every candidate and
/// penalizing gradient-sign disagreement along traj.
IdoResult solve_ido(const LqGame& game, const NeSolution& ne, const Trajectory& traj, const IdoConfig& cfg = {});

}  // namespace opdg
