#pragma once

#include "opdg/errors.hpp"
#include "opdg/game.hpp"
#include "opdg/riccati.hpp"
#include "opdg/simulate.hpp"

#include <vector>

namespace opdg {

inline constexpr double kChatterTol = 1e-7;

/// Samples bracketing a sign change of [B_i' P_i x(t)]_j.
struct CrossingPoint {
  int player = 0;
  int channel = 0;
  double t_minus = 0.0;
  double t_plus = 0.0;
  VectorXd x_minus;
  VectorXd x_plus;
  int sign_plus = 1;
};

std::vector<CrossingPoint> extract_crossings(const LqGame& game, const NeSolution& ne,
                                             const Trajectory& traj);

class InfeasibleWtdo : public InfeasibleError {
 public:
  InfeasibleWtdo(const std::string& what, double measure) : InfeasibleError(what), measure_(measure) {}
  double infeasibility_measure() const { return measure_; }

 private:
  double measure_;
};

struct WtdoResult {
  PotentialFunction potential;
  double eta = 0.0;            // trace of the potential Riccati residual
  double gain_deviation = 0.0;  // second-stage objective
  int crossings = 0;
};

/// Trace of A'Pp + Pp A - Pp B Kp + Qp with Kp the stacked NE gain.
double wtdo_eta(const LqGame& game, const NeSolution& ne, const PotentialFunction& pot);

/// Two-stage LMI: minimize |eta| under the gain-match, PSD and crossing
/// constraints, then among near-optimal points pick the one whose Riccati
/// residual perturbs the NE control law least along the NE state covariance.
WtdoResult solve_wtdo(const LqGame& game, const NeSolution& ne, const std::vector<CrossingPoint>& crossings);


}  // namespace opdg
