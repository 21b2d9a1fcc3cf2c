#include "opdg/tfo.hpp"

#include "opdg/linalg.hpp"
#include "opdg/sdp.hpp"

#include <sstream>

namespace opdg {

namespace {

// Duplication matrix: vec(S) = D vech(S), vech over the upper triangle
// column by column (the SDP layer's ordering).
MatrixXd duplication(int n) {
  MatrixXd D = MatrixXd::Zero(n * n, n * (n + 1) / 2);
  int k = 0;
  for (int j = 0; j < n; ++j)
    for (int i = 0; i <= j; ++i, ++k) {
      D(j * n + i, k) = 1.0;
      D(i * n + j, k) = 1.0;
    }
  return D;
}

}  // namespace

FeasibilityReport check_feasibility(const LqGame& game, const NeSolution& ne) {
  FeasibilityReport r;
  const int n = game.states();
  const int N = game.players();
  const MatrixXd En = MatrixXd::Identity(n, n);
  const MatrixXd D = duplication(n);
  int total_p = 0;
  for (int i = 0; i < N; ++i) total_p += game.dynamics.inputs(i);

  r.condition_b_value = 0.5 * (1.0 + n) - total_p;
  r.condition_b = r.condition_b_value > 0.0;

  std::vector<MatrixXd> blocks;
  for (int i = 0; i < N; ++i) {
    const MatrixXd& Bi = game.B(i);
    const int p = static_cast<int>(Bi.cols());
    r.condition_a.push_back(linalg::rank(Bi, kRankTol) == p);

    // vec(B_i' Pp) = (E_n ⊗ B_i') vec(Pp); vec(omega_i V_i) = sum_j w_j vec(e_j e_j' V_i).
    const MatrixXd kr = linalg::kron(En, Bi.transpose());
    const MatrixXd V = Bi.transpose() * ne.P[i];
    MatrixXd omega_cols(p * n, p);
    for (int j = 0; j < p; ++j) {
      MatrixXd ej = MatrixXd::Zero(p, n);
      ej.row(j) = V.row(j);
      omega_cols.col(j) = linalg::vec(ej);
    }
    MatrixXd aug(p * n, D.cols() + p);
    aug << kr * D, -omega_cols;
    r.consistency_ranks.emplace_back(linalg::rank(kr, kRankTol), linalg::rank(aug, kRankTol));
    blocks.push_back(aug);
  }

  // Joint homogeneous system in (vech Pp, omega_1, ..., omega_N).
  const int nv = static_cast<int>(D.cols());
  r.joint_unknowns = nv + total_p;
  MatrixXd joint = MatrixXd::Zero(total_p * n, r.joint_unknowns);
  int row = 0, col = nv;
  for (int i = 0; i < N; ++i) {
    const int p = game.dynamics.inputs(i);
    joint.block(row, 0, p * n, nv) = blocks[i].leftCols(nv);
    joint.block(row, col, p * n, p) = blocks[i].rightCols(p);
    row += p * n;
    col += p;
  }
  r.joint_rank = linalg::rank(joint, kRankTol);
  r.solution_space_dim = r.joint_unknowns - r.joint_rank;

  bool all_a = true;
  for (bool a : r.condition_a) all_a = all_a && a;
  r.advisory = (all_a && r.condition_b) ? "necessary-conditions-met" : "likely-infeasible";
  if (N > 2) r.advisory += " (extrapolated)";
  return r;
}

TfoResiduals tfo_residuals(const LqGame& game, const NeSolution& ne, const PotentialFunction& pot) {
  TfoResiduals r;
  const MatrixXd B = stack_input_matrix(game.dynamics);
  const MatrixXd Kp = ne.stacked_gain();
  const MatrixXd& A = game.A();
  r.riccati = linalg::max_abs(A.transpose() * pot.Pp + pot.Pp * A - pot.Pp * B * Kp + pot.Qp);
  r.gain = linalg::max_abs(B.transpose() * pot.Pp - pot.Rp * Kp);
  for (int i = 0; i < game.players() && i < static_cast<int>(pot.omega.size()); ++i) {
    r.direction = std::max(r.direction, linalg::max_abs(pot.omega[i] * game.B(i).transpose() * ne.P[i] -
                                                        game.B(i).transpose() * pot.Pp));
  }
  return r;
}

PotentialFunction solve_tfo(const LqGame& game, const NeSolution& ne) {
  using sdp::AffineMatrix;
  const int n = game.states();
  const int m = game.dynamics.total_inputs();
  const int N = game.players();
  const MatrixXd B = stack_input_matrix(game.dynamics);
  const MatrixXd Kp = ne.stacked_gain();
  const MatrixXd& A = game.A();

  sdp::SdpProblem prob;
  prob.add_symmetric("Pp", n);
  prob.add_symmetric("Qp", n);
  prob.add_symmetric("Rp", m);
  for (int i = 0; i < N; ++i)
    prob.add_diagonal("omega" + std::to_string(i + 1), game.dynamics.inputs(i), sdp::kStrictMargin);
  prob.add_scalar("alpha");

  const AffineMatrix Pp = prob.var("Pp");
  const AffineMatrix Qp = prob.var("Qp");
  const AffineMatrix Rp = prob.var("Rp");
  const AffineMatrix alpha = prob.var("alpha");

  // Pp B Kp is symmetric once the gain equation holds; imposing its
  // symmetric part keeps the equality system symmetric along the path.
  const AffineMatrix riccati = A.transpose() * Pp + Pp * A - (Pp * (B * Kp)).symmetric_part() + Qp;
  prob.add_equality(riccati, "potential Riccati", true);
  prob.add_equality(B.transpose() * Pp - Rp * Kp, "gain match");
  for (int i = 0; i < N; ++i) {
    const AffineMatrix w = prob.var("omega" + std::to_string(i + 1));
    prob.add_equality(w * (game.B(i).transpose() * ne.P[i]) - game.B(i).transpose() * Pp,
                      "direction player " + std::to_string(i + 1));
  }
  const AffineMatrix Z = sdp::block_diag({Qp, Rp});
  const MatrixXd I = MatrixXd::Identity(n + m, n + m);
  prob.add_psd(Z - I, "lower sandwich");
  prob.add_psd(sdp::scalar_times(alpha, I) - Z, "upper sandwich");
  prob.add_psd(Pp, "Pp psd");
  // Minimizing alpha instead of alpha^2: alpha >= 1 > 0 on the feasible set.
  prob.minimize(alpha);

  const sdp::SdpSolution sol = sdp::solve_sdp(prob);
  if (sol.status == sdp::SdpStatus::kInfeasible ||
      (sol.status != sdp::SdpStatus::kOptimal && sdp::infeasibility_measure(prob) > 1e-6)) {
    const double measure = sol.status == sdp::SdpStatus::kInfeasible ? sol.infeasibility : sdp::infeasibility_measure(prob);
    std::ostringstream os;
    os << "trajectory-free problem is infeasible (constraint violation at least " << measure << ")";
    throw InfeasibleTfo(os.str(), check_feasibility(game, ne), measure);
  }
  if (sol.status != sdp::SdpStatus::kOptimal) {
    throw SolverFailure("SDP solver stopped with status " + sdp::to_string(sol.status));
  }

  PotentialFunction pot;
  pot.method = MethodTag::kTfo;
  pot.Pp = linalg::sym(sol.values.at("Pp"));
  pot.Qp = linalg::sym(sol.values.at("Qp"));
  pot.Rp = linalg::sym(sol.values.at("Rp"));
  pot.Kp = pot.Rp.ldlt().solve(B.transpose() * pot.Pp);
  for (int i = 0; i < N; ++i) pot.omega.push_back(sol.values.at("omega" + std::to_string(i + 1)));
  pot.alpha = sol.values.at("alpha")(0, 0);
  return pot;
}

}  // namespace opdg
