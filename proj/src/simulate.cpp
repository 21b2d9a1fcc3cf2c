#include "opdg/simulate.hpp"

#include "opdg/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace opdg {

double default_horizon(const MatrixXd& F) {
  const double a = std::abs(linalg::spectral_abscissa(F));
  if (a == 0.0) return kMaxHorizon;
  return std::min(kMaxHorizon, 8.0 / a);
}

Trajectory simulate_stacked(const LqGame& game, const MatrixXd& K, double horizon, double step) {
  if (!(step > 0.0)) throw std::invalid_argument("step must be positive");
  const MatrixXd F = game.A() - stack_input_matrix(game.dynamics) * K;
  const auto steps = static_cast<Eigen::Index>(std::llround(horizon / step));
  Trajectory tr;
  tr.step = step;
  tr.x.resize(steps + 1, game.states());
  VectorXd x = game.x0;
  tr.x.row(0) = x.transpose();
  for (Eigen::Index k = 1; k <= steps; ++k) {
    const VectorXd k1 = F * x;
    const VectorXd k2 = F * (x + 0.5 * step * k1);
    const VectorXd k3 = F * (x + 0.5 * step * k2);
    const VectorXd k4 = F * (x + step * k3);
    x += step / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!x.allFinite() || x.norm() > 1e9) throw Diverged("closed-loop state exceeded 1e9");
    tr.x.row(k) = x.transpose();
  }
  tr.u = -tr.x * K.transpose();
  return tr;
}

Trajectory simulate_closed_loop(const LqGame& game, const std::vector<MatrixXd>& gains, double horizon,
                                double step) {
  NeSolution stacker;
  stacker.K = gains;
  return simulate_stacked(game, stacker.stacked_gain(), horizon, step);
}

Trajectory add_noise(const Trajectory& traj, double snr_db, std::uint64_t seed) {
  Trajectory out = traj;
  if (std::isinf(snr_db) && snr_db > 0) return out;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double ratio = std::pow(10.0, snr_db / 10.0);
  for (Eigen::Index c = 0; c < traj.x.cols(); ++c) {
    const double power = traj.x.col(c).squaredNorm() / static_cast<double>(traj.samples());
    const double sd = std::sqrt(power / ratio);
    for (Eigen::Index k = 0; k < traj.samples(); ++k) out.x(k, c) += sd * normal(rng);
  }
  return out;
}

TrajectoryError trajectory_error(const Trajectory& p, const Trajectory& star) {
  if (p.x.rows() != star.x.rows() || p.x.cols() != star.x.cols())
    throw std::invalid_argument("trajectory_error needs identical grids");
  TrajectoryError e;
  for (Eigen::Index i = 0; i < p.x.cols(); ++i) {
    const double norm = p.x.col(i).cwiseAbs().maxCoeff();
    if (norm == 0.0) {
      e.degenerate_channels.push_back(static_cast<int>(i));
      continue;
    }
    e.value = std::max(e.value, (p.x.col(i) - star.x.col(i)).cwiseAbs().maxCoeff() / norm);
  }
  return e;
}

HamiltonianGradients hamiltonian_gradients(const LqGame& game, const NeSolution& ne, const MatrixXd& Pp,
                                           const Trajectory& traj) {
  const Eigen::Index m = game.dynamics.total_inputs();
  HamiltonianGradients g;
  g.orig.resize(traj.samples(), m);
  g.pot.resize(traj.samples(), m);
  for (int i = 0; i < game.players(); ++i) {
    const int off = game.dynamics.input_offset(i), p = game.dynamics.inputs(i);
    g.orig.middleCols(off, p) = traj.x * (game.B(i).transpose() * ne.P[i]).transpose();
    g.pot.middleCols(off, p) = traj.x * (game.B(i).transpose() * Pp).transpose();
  }
  return g;
}

std::vector<Eigen::Index> sign_changes(const VectorXd& s, double chatter_rel) {
  std::vector<Eigen::Index> out;
  if (s.size() < 2) return out;
  const double floor = chatter_rel * s.cwiseAbs().maxCoeff();
  for (Eigen::Index k = 0; k + 1 < s.size(); ++k) {
    if (s(k) * s(k + 1) >= 0.0) continue;
    if (std::abs(s(k)) < floor && std::abs(s(k + 1)) < floor) continue;
    out.push_back(k);
  }
  return out;
}

namespace {

Eigen::Index nearest_distance(const std::vector<Eigen::Index>& from, const std::vector<Eigen::Index>& to) {
  Eigen::Index worst = 0;
  for (Eigen::Index k : from) {
    auto it = std::lower_bound(to.begin(), to.end(), k);
    Eigen::Index d = std::numeric_limits<Eigen::Index>::max();
    if (it != to.end()) d = *it - k;
    if (it != to.begin()) d = std::min(d, k - *std::prev(it));
    worst = std::max(worst, d);
  }
  return worst;
}

}  // namespace

OpdgReport verify_opdg(const LqGame& game, const NeSolution& ne, const PotentialFunction& pot,
                       const Trajectory& traj) {
  const HamiltonianGradients g = hamiltonian_gradients(game, ne, pot.Pp, traj);
  OpdgReport r;
  const Eigen::Index m = g.orig.cols();
  for (Eigen::Index c = 0; c < m; ++c) {
    const double scale = g.orig.col(c).cwiseAbs().maxCoeff() * g.pot.col(c).cwiseAbs().maxCoeff();
    const double sign_tol = 1e-9 * scale;
    for (Eigen::Index k = 0; k < g.orig.rows(); ++k) {
      const double prod = g.orig(k, c) * g.pot(k, c);
      ++r.checked;
      if (prod < -sign_tol) {
        ++r.violations;
        r.worst_violation = std::min(r.worst_violation, scale > 0.0 ? prod / scale : prod);
      }
    }
    r.crossings_orig.push_back(sign_changes(g.orig.col(c)));
    r.crossings_pot.push_back(sign_changes(g.pot.col(c)));
    const auto& a = r.crossings_orig.back();
    const auto& b = r.crossings_pot.back();
    r.max_misalignment = std::max({r.max_misalignment, nearest_distance(a, b), nearest_distance(b, a)});
  }
  r.pass_rate = r.checked ? 1.0 - static_cast<double>(r.violations) / static_cast<double>(r.checked) : 1.0;
  return r;
}

ExactPotentialCheck check_exact_potential(const LqGame& game, const NeSolution& ne,
                                          const PotentialFunction& pot) {
  ExactPotentialCheck c;
  double scale = 1.0;
  for (int i = 0; i < game.players(); ++i) {
    const int off = game.dynamics.input_offset(i), p = game.dynamics.inputs(i);
    const MatrixXd dR = pot.Rp.block(off, off, p, p) - game.R(i, i);
    const MatrixXd own = game.B(i).transpose() * ne.P[i];
    const MatrixXd dV = game.B(i).transpose() * pot.Pp - own;
    c.residual = std::max({c.residual, linalg::max_abs(dR), linalg::max_abs(dV)});
    scale = std::max({scale, linalg::max_abs(game.R(i, i)), linalg::max_abs(own)});
  }
  c.exact = c.residual <= tol::kEq * scale;
  return c;
}

}  // namespace opdg
