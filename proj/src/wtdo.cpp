#include "opdg/wtdo.hpp"

#include "opdg/linalg.hpp"
#include "opdg/sdp.hpp"

#include <sstream>

namespace opdg {

std::vector<CrossingPoint> extract_crossings(const LqGame& game, const NeSolution& ne,
                                             const Trajectory& traj) {
  std::vector<CrossingPoint> out;
  for (int i = 0; i < game.players(); ++i) {
    const MatrixXd V = game.B(i).transpose() * ne.P[i];
    const MatrixXd s = traj.x * V.transpose();  // samples x p_i
    for (int j = 0; j < V.rows(); ++j) {
      for (Eigen::Index k : sign_changes(s.col(j), kChatterTol)) {
        CrossingPoint c;
        c.player = i;
        c.channel = j;
        c.t_minus = traj.time(k);
        c.t_plus = traj.time(k + 1);
        c.x_minus = traj.x.row(k).transpose();
        c.x_plus = traj.x.row(k + 1).transpose();
        c.sign_plus = s(k + 1, j) > 0.0 ? 1 : -1;
        out.push_back(std::move(c));
      }
    }
  }
  return out;
}

double wtdo_eta(const LqGame& game, const NeSolution& ne, const PotentialFunction& pot) {
  const MatrixXd B = stack_input_matrix(game.dynamics);
  const MatrixXd& A = game.A();
  return (A.transpose() * pot.Pp + pot.Pp * A - pot.Pp * B * ne.stacked_gain() + pot.Qp).trace();
}

namespace {

using sdp::AffineMatrix;

struct Model {
  sdp::SdpProblem prob;
  AffineMatrix eta;
  AffineMatrix residual;  // symmetric potential Riccati residual
};

// Requires sign * [B_i' Pp x]_j >= eps.
struct SignPoint {
  int player;
  int channel;
  VectorXd x;
  int sign;
};

std::vector<SignPoint> sign_points(const std::vector<CrossingPoint>& crossings) {
  std::vector<SignPoint> out;
  for (const auto& c : crossings) {
    out.push_back({c.player, c.channel, c.x_plus, c.sign_plus});
    out.push_back({c.player, c.channel, c.x_minus, -c.sign_plus});
  }
  return out;
}

Model base_model(const LqGame& game, const NeSolution& ne, const std::vector<SignPoint>& points, bool epigraph) {
  const int n = game.states();
  const int m = game.dynamics.total_inputs();
  const MatrixXd B = stack_input_matrix(game.dynamics);
  const MatrixXd Kp = ne.stacked_gain();
  const MatrixXd& A = game.A();

  Model md;
  auto& prob = md.prob;
  prob.add_symmetric("Pp", n);
  prob.add_symmetric("Qp", n);
  prob.add_symmetric("Rp", m);
  if (epigraph) prob.add_scalar("s");
  const AffineMatrix Pp = prob.var("Pp");
  const AffineMatrix Qp = prob.var("Qp");
  const AffineMatrix Rp = prob.var("Rp");

  md.residual = A.transpose() * Pp + Pp * A - (Pp * (B * Kp)).symmetric_part() + Qp;
  md.eta = md.residual.trace();

  prob.add_equality(B.transpose() * Pp - Rp * Kp, "gain match");
  prob.add_psd(Pp, "Pp psd");
  prob.add_psd(Qp, "Qp psd");
  prob.add_psd(Rp - MatrixXd::Identity(m, m), "Rp floor");

  if (!points.empty()) {
    // [b' Pp x] = kron(x, b)' vec(Pp).
    const auto rows = static_cast<Eigen::Index>(points.size());
    AffineMatrix lhs = AffineMatrix::from_constant(MatrixXd::Zero(rows, 1), prob.num_scalars());
    for (Eigen::Index r = 0; r < rows; ++r) {
      const auto& q = points[static_cast<std::size_t>(r)];
      const VectorXd b = game.B(q.player).col(q.channel);
      lhs.coeffs.row(r) = q.sign * (linalg::kron(q.x, b).transpose() * Pp.coeffs);
    }
    prob.add_margin(lhs, sdp::kStrictMargin, "crossing sign");
  }
  return md;
}

MatrixXd value(const sdp::SdpSolution& sol, const char* name) { return linalg::sym(sol.values.at(name)); }


WtdoResult solve_points(const LqGame& game, const NeSolution& ne, const std::vector<SignPoint>& points,
                        int crossings) {
  const int n = game.states();
  const int m = game.dynamics.total_inputs();
  const MatrixXd B = stack_input_matrix(game.dynamics);

  // Stage 1: minimize |eta| through its epigraph -s <= eta <= s.
  Model s1 = base_model(game, ne, points, true);
  const AffineMatrix s = s1.prob.var("s");
  s1.prob.add_margin(s - s1.eta, 0.0, "eta upper");
  s1.prob.add_margin(s + s1.eta, 0.0, "eta lower");
  s1.prob.minimize(s);
  const sdp::SdpSolution sol1 = sdp::solve_sdp(s1.prob);
  if (sol1.status == sdp::SdpStatus::kInfeasible) {
    std::ostringstream os;
    os << "weakly trajectory-dependent problem is infeasible with " << crossings
       << " crossings (constraint violation at least " << sol1.infeasibility << ")";
    throw InfeasibleWtdo(os.str(), sol1.infeasibility);
  }
  if (sol1.status != sdp::SdpStatus::kOptimal)
    throw SolverFailure("WTDO stage 1 stopped with status " + sdp::to_string(sol1.status));
  const double eta_star = std::abs(s1.eta.evaluate(sol1.x)(0, 0));

  // Stage 2: keep |eta| within 1e-6 of its optimum and minimize the first-order
  // change of the recovered gain, B' Delta L, where Acl' Delta + Delta Acl = -M
  // and L L' is the NE state covariance from x0.
  Model s2 = base_model(game, ne, points, false);
  const double bound = eta_star + 1e-6;
  s2.prob.add_margin(-s2.eta + MatrixXd::Constant(1, 1, bound), 0.0, "eta upper");
  s2.prob.add_margin(s2.eta + MatrixXd::Constant(1, 1, bound), 0.0, "eta lower");
  const int t_id = s2.prob.add_scalar("t");
  const Eigen::Index nv = s2.prob.num_scalars();

  const MatrixXd Acl = game.A() - B * ne.stacked_gain();
  const MatrixXd x0 = game.x0;
  const MatrixXd Gamma = linalg::solve_lyapunov(Acl.transpose(), x0 * x0.transpose());
  const MatrixXd L = linalg::psd_factor(Gamma);
  const Eigen::PartialPivLU<MatrixXd> lop(linalg::lyapunov_operator(Acl));

  const AffineMatrix M = s2.residual.padded(nv);
  AffineMatrix Delta;
  Delta.rows = n;
  Delta.cols = n;
  {
    const VectorXd dc = lop.solve(-linalg::vec(M.constant));
    Delta.constant = Eigen::Map<const MatrixXd>(dc.data(), n, n);
  }
  Delta.coeffs = lop.solve(-M.coeffs);
  const AffineMatrix E = B.transpose() * Delta * L;  // m x n

  // [[I, vec E], [vec E', t]] ⪰ 0  <=>  t >= |E|_F^2.
  const Eigen::Index k = static_cast<Eigen::Index>(m) * n;
  AffineMatrix schur = AffineMatrix::from_constant(MatrixXd::Zero(k + 1, k + 1), nv);
  schur.constant.topLeftCorner(k, k).setIdentity();
  for (Eigen::Index r = 0; r < k; ++r) {
    schur.constant(r, k) = schur.constant(k, r) = E.constant.data()[r];
    schur.coeffs.row(k * (k + 1) + r) = E.coeffs.row(r);  // entry (r, k)
    schur.coeffs.row(r * (k + 1) + k) = E.coeffs.row(r);  // entry (k, r)
  }
  schur.coeffs(k * (k + 1) + k, s2.prob.variable("t").offset) = 1.0;
  s2.prob.add_psd(schur, "gain deviation");
  s2.prob.minimize(s2.prob.var(t_id));

  sdp::SdpSolution sol2 = sdp::solve_sdp(s2.prob);
  const sdp::SdpSolution& sol = sol2.status == sdp::SdpStatus::kOptimal ? sol2 : sol1;

  WtdoResult res;
  res.crossings = crossings;
  auto& pot = res.potential;
  pot.method = MethodTag::kWtdo;
  pot.Pp = value(sol, "Pp");
  pot.Qp = value(sol, "Qp");
  pot.Rp = value(sol, "Rp");
  pot.Kp = pot.Rp.ldlt().solve(B.transpose() * pot.Pp);
  res.eta = wtdo_eta(game, ne, pot);
  res.gain_deviation = sol2.status == sdp::SdpStatus::kOptimal ? std::sqrt(std::max(0.0, sol2.objective_value)) : -1.0;
  return res;
}

}  // namespace

WtdoResult solve_wtdo(const LqGame& game, const NeSolution& ne, const std::vector<CrossingPoint>& crossings) {
  return solve_points(game, ne, sign_points(crossings), static_cast<int>(crossings.size()));
}

}  // namespace opdg
