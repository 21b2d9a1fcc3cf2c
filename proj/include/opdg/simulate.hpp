#pragma once

#include "opdg/game.hpp"
#include "opdg/riccati.hpp"

#include <cstdint>
#include <limits>
#include <vector>

namespace opdg {

inline constexpr double kDefaultStep = 1e-3;
inline constexpr double kMaxHorizon = 20.0;

/// Uniformly sampled closed-loop response. Row k of x / u is sample k.
struct Trajectory {
  double t0 = 0.0;
  double step = kDefaultStep;
  MatrixXd x;  // samples x n
  MatrixXd u;  // samples x m, players stacked in order

  Eigen::Index samples() const { return x.rows(); }
  double time(Eigen::Index k) const { return t0 + step * static_cast<double>(k); }
};

/// 8 / |slowest closed-loop real part|, capped at kMaxHorizon.
double default_horizon(const MatrixXd& closed_loop_matrix);

/// RK4 integration of x' = (A - sum B_i K_i) x from game.x0 with u_i = -K_i x.
/// Throws Diverged when |x| exceeds 1e9.
Trajectory simulate_closed_loop(const LqGame& game, const std::vector<MatrixXd>& gains, double horizon,
                                double step = kDefaultStep);

/// Same, with the gains given as one stacked m x n matrix.
Trajectory simulate_stacked(const LqGame& game, const MatrixXd& stacked_gain, double horizon,
                            double step = kDefaultStep);

/// Adds white Gaussian noise to the states, per channel at the given SNR
/// relative to the channel's mean power. Infinite snr_db returns a copy.
Trajectory add_noise(const Trajectory& traj, double snr_db, std::uint64_t seed);

struct TrajectoryError {
  double value = 0.0;
  std::vector<int> degenerate_channels;  // zero potential-trajectory channels, skipped
};

/// max_i max_t |xp_i - x*_i| / max_t |xp_i| (normalized by traj_p).
TrajectoryError trajectory_error(const Trajectory& traj_p, const Trajectory& traj_star);

/// Per sample, the stacked channels [B_i' M_i x]_j for each player.
struct HamiltonianGradients {
  MatrixXd orig;  // samples x m, M_i = P_i
  MatrixXd pot;   // samples x m, M_i = Pp
};

HamiltonianGradients hamiltonian_gradients(const LqGame& game, const NeSolution& ne, const MatrixXd& Pp,
                                           const Trajectory& traj);

/// Indices k where signal(k) * signal(k + 1) < 0, dropping brackets where
/// both magnitudes are below chatter_rel * max|signal|.
std::vector<Eigen::Index> sign_changes(const VectorXd& signal, double chatter_rel = 1e-7);

struct OpdgReport {
  double pass_rate = 0.0;
  Eigen::Index checked = 0;
  Eigen::Index violations = 0;
  double worst_violation = 0.0;  // most negative normalized product
  // Zero crossings per stacked channel, as bracket start indices.
  std::vector<std::vector<Eigen::Index>> crossings_orig;
  std::vector<std::vector<Eigen::Index>> crossings_pot;
  /// Largest distance (samples) from a crossing to the nearest crossing of
  /// the other signal; std::numeric_limits<Eigen::Index>::max() when one
  /// signal crosses and the other never does.
  Eigen::Index max_misalignment = 0;
};

OpdgReport verify_opdg(const LqGame& game, const NeSolution& ne, const PotentialFunction& pot,
                       const Trajectory& traj);

struct ExactPotentialCheck {
  bool exact = false;
  double residual = 0.0;
};

/// Rp's u_i block equals R_ii and B_i' Pp = B_i' P_i for every player.
ExactPotentialCheck check_exact_potential(const LqGame& game, const NeSolution& ne,
                                          const PotentialFunction& pot);

}  // namespace opdg
