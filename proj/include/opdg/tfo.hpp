#pragma once

#include "opdg/errors.hpp"
#include "opdg/game.hpp"
#include "opdg/riccati.hpp"

#include <string>
#include <utility>
#include <vector>

namespace opdg {

inline constexpr double kRankTol = 1e-10;

/// Dimension-count necessary conditions for the trajectory-free LMI.
/// Advisory only; it never gates solve_tfo.
struct FeasibilityReport {
  std::vector<bool> condition_a;  // B_i has full column rank
  double condition_b_value = 0.0;  // (1 + n) / 2 - sum p_i
  bool condition_b = false;
  /// Per player: rank(E_n ⊗ B_i') and the rank of the system that also
  /// carries the omega_i unknowns.
  std::vector<std::pair<int, int>> consistency_ranks;
  /// All players' direction constraints stacked, in (vech Pp, omega) unknowns.
  int joint_rank = 0;
  int joint_unknowns = 0;
  int solution_space_dim = 0;
  std::string advisory;
};

FeasibilityReport check_feasibility(const LqGame& game, const NeSolution& ne);

/// No potential satisfies the trajectory-free constraints. This is not a
/// proof that the game has no ordinal potential.
class InfeasibleTfo : public InfeasibleError {
 public:
  InfeasibleTfo(const std::string& what, FeasibilityReport report, double measure)
      : InfeasibleError(what), report_(std::move(report)), measure_(measure) {}
  const FeasibilityReport& report() const { return report_; }
  double infeasibility_measure() const { return measure_; }

 private:
  FeasibilityReport report_;
  double measure_;
};

struct TfoResiduals {
  double riccati = 0.0;    // potential Riccati equation, max-abs
  double gain = 0.0;       // B'Pp - Rp Kp, max-abs
  double direction = 0.0;  // omega_i B_i'P_i - B_i'Pp, max-abs
};

TfoResiduals tfo_residuals(const LqGame& game, const NeSolution& ne, const PotentialFunction& pot);

/// Minimum-condition-number potential whose optimal control law is the
/// stacked NE gain. Throws InfeasibleTfo or SolverFailure.
PotentialFunction solve_tfo(const LqGame& game, const NeSolution& ne);

}  // namespace opdg
