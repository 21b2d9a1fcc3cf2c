#pragma once

#include "opdg/errors.hpp"
#include "opdg/game.hpp"

#include <vector>

namespace opdg {

inline constexpr double kRiccatiTol = 1e-9;
inline constexpr int kRiccatiMaxIter = 500;

struct AreSolution {
  MatrixXd P;
  MatrixXd K;
  double residual = 0.0;
  int iterations = 0;
};

/// Stabilizing solution of A'P + PA - P B R^-1 B' P + Q = 0 (Newton-Kleinman).
/// Throws NotStabilizable or NoConvergence.
AreSolution solve_single_are(const MatrixXd& A, const MatrixXd& B, const MatrixXd& Q,
                             const MatrixXd& R);

/// Frobenius norm of the single ARE left-hand side.
double are_residual(const MatrixXd& A, const MatrixXd& B, const MatrixXd& Q, const MatrixXd& R,
                    const MatrixXd& P);

struct NeSolution {
  std::vector<MatrixXd> P;
  std::vector<MatrixXd> K;
  double residual = 0.0;  // max over players of the coupled-equation residual
  int iterations = 0;

  /// [K_1; ...; K_N]
  MatrixXd stacked_gain() const;
};

/// Feedback Nash equilibrium via policy iteration on the coupled AREs.
NeSolution solve_coupled_are(const LqGame& game);

/// Per-player Frobenius residuals of the coupled AREs at the given P.
std::vector<double> coupled_residuals(const LqGame& game, const std::vector<MatrixXd>& P);

/// A - sum_j B_j K_j.
MatrixXd closed_loop(const LqGame& game, const std::vector<MatrixXd>& K);

}  // namespace opdg
