#pragma once

// Domain data for linear-quadratic differential games and their quadratic
// potential functions.

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace opdg {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace tol {
inline constexpr double kPsd = 1e-9;
inline constexpr double kPd = 1e-9;
// Relative to the max-abs entry of the compared matrices.
inline constexpr double kEq = 1e-6;
// Matrices closer than this to symmetric are symmetrized, others rejected.
inline constexpr double kSymmetry = 1e-10;
}  // namespace tol

/// x' = A x + sum_i B_i u_i.
struct LtiDynamics {
  MatrixXd A;
  std::vector<MatrixXd> B;

  int states() const { return static_cast<int>(A.rows()); }
  int players() const { return static_cast<int>(B.size()); }
  int inputs(int player) const { return static_cast<int>(B[player].cols()); }
  int total_inputs() const;
  /// Column offset of player `i`'s inputs inside the stacked input vector.
  int input_offset(int player) const;
};

/// J_i = 1/2 ∫ x'Q x + sum_j u_j' R_ij u_j dt.
struct PlayerCost {
  MatrixXd Q;
  std::vector<MatrixXd> R;  // one entry per player j
};

struct LqGame {
  LtiDynamics dynamics;
  std::vector<PlayerCost> costs;
  VectorXd x0;

  int states() const { return dynamics.states(); }
  int players() const { return dynamics.players(); }
  const MatrixXd& A() const { return dynamics.A; }
  const MatrixXd& B(int i) const { return dynamics.B[i]; }
  const MatrixXd& Q(int i) const { return costs[i].Q; }
  const MatrixXd& R(int i, int j) const { return costs[i].R[j]; }
};

enum class MethodTag { kTfo, kWtdo, kIdo };

std::string to_string(MethodTag tag);
MethodTag method_from_string(const std::string& name);

/// Quadratic potential J_p = 1/2 ∫ x'Qp x + u'Rp u dt together with the
/// Riccati solution and feedback gain it induces.
struct PotentialFunction {
  MatrixXd Qp;
  MatrixXd Rp;
  MatrixXd Pp;
  MatrixXd Kp;
  std::vector<MatrixXd> omega;  // TFO only, one diagonal matrix per player
  std::optional<double> alpha;  // TFO only
  MethodTag method = MethodTag::kTfo;
};

struct Violation {
  std::string field;
  std::string invariant;
  double value = 0.0;  // offending eigenvalue, dimension or asymmetry

  std::string describe() const;
};

/// Every invariant failure of `game`. Never throws on finite input.
std::vector<Violation> validate_game(const LqGame& game);

/// B = [B_1, ..., B_N] (column concatenation in player order).
MatrixXd stack_input_matrix(const LtiDynamics& dyn);

/// Rows of the stacked gain that belong to `player`.
MatrixXd player_rows(const LtiDynamics& dyn, const MatrixXd& stacked, int player);

/// Checks symmetry within tol::kSymmetry (relative to max-abs) and returns
/// (M + M')/2; returns std::nullopt when the asymmetry is larger.
std::optional<MatrixXd> symmetrized(const MatrixXd& m);

/// Returns `game` with every Q and R symmetrized. Throws std::invalid_argument
/// when some matrix is visibly asymmetric.
LqGame symmetrize_game(const LqGame& game);

/// Checks the potential-function invariants (Qp ⪰ 0, Rp ≻ 0, Pp ⪰ 0, Kp
/// consistency and, for TFO results, the condition-number sandwich).
std::vector<Violation> validate_potential(const LqGame& game, const PotentialFunction& pot);

}  // namespace opdg
