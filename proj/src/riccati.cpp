#include "opdg/riccati.hpp"

#include "opdg/linalg.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <optional>
#include <sstream>

namespace opdg {

namespace {

using linalg::sym;

// Stabilizing gain from the stable invariant subspace of the Hamiltonian.
std::optional<MatrixXd> hamiltonian_gain(const MatrixXd& A, const MatrixXd& B, const MatrixXd& Q,
                                         const MatrixXd& R) {
  const Eigen::Index n = A.rows();
  const MatrixXd S = B * R.ldlt().solve(B.transpose());
  MatrixXd H(2 * n, 2 * n);
  H << A, -S, -Q, -A.transpose();
  Eigen::ComplexEigenSolver<MatrixXd> es(H);
  if (es.info() != Eigen::Success) return std::nullopt;

  Eigen::MatrixXcd V(2 * n, n);
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < 2 * n && k < n; ++i) {
    if (es.eigenvalues()(i).real() < 0.0) V.col(k++) = es.eigenvectors().col(i);
  }
  if (k != n) return std::nullopt;
  Eigen::FullPivLU<Eigen::MatrixXcd> lu(V.topRows(n).transpose());
  if (!lu.isInvertible()) return std::nullopt;
  // P = V2 V1^-1, computed as (V1^-T V2^T)^T.
  const Eigen::MatrixXcd Pc = lu.solve(V.bottomRows(n).transpose()).transpose();
  const MatrixXd P = sym(Pc.real());
  if (!P.allFinite()) return std::nullopt;
  return R.ldlt().solve(B.transpose() * P);
}

// Bass' method: shift A until it is anti-stable, then place the poles of the
// shifted system with the controllability-Gramian-like solution.
std::optional<MatrixXd> bass_gain(const MatrixXd& A, const MatrixXd& B) {
  const Eigen::Index n = A.rows();
  const double beta = std::max(1.0, linalg::max_abs(A)) + std::abs(linalg::spectral_abscissa(A));
  const MatrixXd F = -(A + beta * MatrixXd::Identity(n, n)).transpose();
  // F' X + X F + 2 B B' = 0  <=>  (A + beta I) X + X (A + beta I)' = 2 B B'.
  const MatrixXd X = sym(linalg::solve_lyapunov(F, 2.0 * B * B.transpose()));
  Eigen::LDLT<MatrixXd> ldlt(X);
  if (ldlt.info() != Eigen::Success || linalg::min_eigenvalue(X) <= 0.0) return std::nullopt;
  return MatrixXd(B.transpose() * ldlt.solve(MatrixXd::Identity(n, n)));
}

}  // namespace

double are_residual(const MatrixXd& A, const MatrixXd& B, const MatrixXd& Q, const MatrixXd& R,
                    const MatrixXd& P) {
  const MatrixXd BtP = B.transpose() * P;
  return (A.transpose() * P + P * A - BtP.transpose() * R.ldlt().solve(BtP) + Q).norm();
}

AreSolution solve_single_are(const MatrixXd& A, const MatrixXd& B, const MatrixXd& Q,
                             const MatrixXd& R) {
  if (!linalg::is_stabilizable(A, B)) throw NotStabilizable("(A, B) is not stabilizable");

  const Eigen::LDLT<MatrixXd> Rf(R);
  std::optional<MatrixXd> K0;
  if (linalg::is_hurwitz(A)) {
    K0 = MatrixXd::Zero(B.cols(), A.rows());
  } else {
    K0 = hamiltonian_gain(A, B, Q, R);
    if (!K0 || !linalg::is_hurwitz(A - B * *K0)) K0 = bass_gain(A, B);
  }
  if (!K0 || !linalg::is_hurwitz(A - B * *K0))
    throw NotStabilizable("no stabilizing initial gain found");

  AreSolution out;
  MatrixXd K = *K0;
  double best = std::numeric_limits<double>::infinity();
  for (int it = 1; it <= kRiccatiMaxIter; ++it) {
    const MatrixXd F = A - B * K;
    if (!linalg::is_hurwitz(F, 0.0)) break;
    const MatrixXd P = sym(linalg::solve_lyapunov(F, Q + K.transpose() * R * K));
    K = Rf.solve(B.transpose() * P);
    const double res = are_residual(A, B, Q, R, P);
    out.iterations = it;
    if (res < best) {
      best = res;
      out.P = P;
      out.K = K;
      out.residual = res;
    }
    if (res < kRiccatiTol * 1e-2) break;
    // Newton converges quadratically; a stalled residual means we are at
    // the accuracy floor of the Lyapunov solves.
    if (it > 3 && res > 0.5 * best && best < kRiccatiTol) break;
  }
  if (out.P.size() == 0 || out.residual >= kRiccatiTol || !linalg::is_hurwitz(A - B * out.K)) {
    std::ostringstream os;
    os << "Newton-Kleinman did not converge (residual " << best << ")";
    throw NoConvergence(os.str(), best, out.iterations);
  }
  return out;
}

MatrixXd NeSolution::stacked_gain() const {
  Eigen::Index rows = 0;
  for (const auto& k : K) rows += k.rows();
  MatrixXd out(rows, K.empty() ? 0 : K.front().cols());
  Eigen::Index r = 0;
  for (const auto& k : K) {
    out.middleRows(r, k.rows()) = k;
    r += k.rows();
  }
  return out;
}

MatrixXd closed_loop(const LqGame& game, const std::vector<MatrixXd>& K) {
  MatrixXd F = game.A();
  for (int j = 0; j < game.players(); ++j) F -= game.B(j) * K[j];
  return F;
}

std::vector<double> coupled_residuals(const LqGame& game, const std::vector<MatrixXd>& P) {
  const int N = game.players();
  const MatrixXd& A = game.A();
  // K_j = R_jj^-1 B_j' P_j, so P_i S_j P_j = P_i B_j K_j and
  // P_j S_ij P_j = K_j' R_ij K_j.
  std::vector<MatrixXd> K(N);
  for (int j = 0; j < N; ++j) K[j] = game.R(j, j).ldlt().solve(game.B(j).transpose() * P[j]);

  std::vector<double> out(N);
  for (int i = 0; i < N; ++i) {
    MatrixXd lhs = A.transpose() * P[i] + P[i] * A + game.Q(i);
    for (int j = 0; j < N; ++j) {
      const MatrixXd PiBjKj = P[i] * game.B(j) * K[j];
      lhs -= PiBjKj + PiBjKj.transpose();
      lhs += K[j].transpose() * game.R(i, j) * K[j];
    }
    out[i] = lhs.norm();
  }
  return out;
}

namespace {

// Player i's best response to fixed opponent gains: an ordinary LQR on the
// opponent-closed system with the opponents' inputs folded into the state cost.
AreSolution best_response(const LqGame& game, const std::vector<MatrixXd>& K, int i) {
  MatrixXd Ai = game.A();
  MatrixXd Qi = game.Q(i);
  for (int j = 0; j < game.players(); ++j) {
    if (j == i) continue;
    Ai -= game.B(j) * K[j];
    Qi += K[j].transpose() * game.R(i, j) * K[j];
  }
  return solve_single_are(Ai, game.B(i), sym(Qi), game.R(i, i));
}

// Value matrix of player i when every player uses the given gains.
MatrixXd player_value(const LqGame& game, const std::vector<MatrixXd>& K, int i) {
  MatrixXd C = game.Q(i);
  for (int j = 0; j < game.players(); ++j) C += K[j].transpose() * game.R(i, j) * K[j];
  return sym(linalg::solve_lyapunov(closed_loop(game, K), C));
}

double max_of(const std::vector<double>& v) { return *std::max_element(v.begin(), v.end()); }

std::vector<MatrixXd> initial_gains(const LqGame& game) {
  const int N = game.players();
  std::vector<MatrixXd> K(N);
  bool ok = true;
  for (int i = 0; i < N && ok; ++i) {
    try {
      K[i] = solve_single_are(game.A(), game.B(i), game.Q(i), game.R(i, i)).K;
    } catch (const NumericalError&) {
      ok = false;
    }
  }
  if (ok && linalg::is_hurwitz(closed_loop(game, K))) return K;

  // Some player cannot stabilize alone, or the independent designs fight each
  // other: start from the joint LQR instead.
  const MatrixXd B = stack_input_matrix(game.dynamics);
  MatrixXd Q = MatrixXd::Zero(game.states(), game.states());
  std::vector<MatrixXd> Rs;
  for (int i = 0; i < N; ++i) {
    Q += game.Q(i) / N;
    Rs.push_back(game.R(i, i));
  }
  const MatrixXd Kj = solve_single_are(game.A(), B, Q, linalg::block_diag(Rs)).K;
  for (int i = 0; i < N; ++i) K[i] = player_rows(game.dynamics, Kj, i);
  return K;
}

}  // namespace

NeSolution solve_coupled_are(const LqGame& game) {
  const int N = game.players();
  if (N == 1) {
    const AreSolution s = solve_single_are(game.A(), game.B(0), game.Q(0), game.R(0, 0));
    return NeSolution{{s.P}, {s.K}, s.residual, s.iterations};
  }

  std::vector<MatrixXd> K = initial_gains(game);
  std::vector<MatrixXd> P(N);
  for (int i = 0; i < N; ++i) P[i] = player_value(game, K, i);
  double res = max_of(coupled_residuals(game, P));

  int it = 0;
  while (res >= kRiccatiTol && it < kRiccatiMaxIter) {
    ++it;
    const std::vector<MatrixXd> K_old = K;
    const std::vector<MatrixXd> P_old = P;
    for (int i = 0; i < N; ++i) {
      const AreSolution br = best_response(game, K, i);
      K[i] = br.K;
      P[i] = br.P;
    }
    double next = max_of(coupled_residuals(game, P));
    if (next > res) {
      for (int i = 0; i < N; ++i) K[i] = 0.5 * (K_old[i] + K[i]);
      if (linalg::is_hurwitz(closed_loop(game, K))) {
        for (int i = 0; i < N; ++i) P[i] = player_value(game, K, i);
        next = max_of(coupled_residuals(game, P));
      }
    }
    res = next;
  }

  for (int i = 0; i < N; ++i) K[i] = game.R(i, i).ldlt().solve(game.B(i).transpose() * P[i]);
  if (res >= kRiccatiTol || !linalg::is_hurwitz(closed_loop(game, K))) {
    std::ostringstream os;
    os << "coupled Riccati iteration stopped after " << it << " sweeps with residual " << res;
    throw NoConvergence(os.str(), res, it);
  }
  return NeSolution{P, K, res, it};
}

}  // namespace opdg
