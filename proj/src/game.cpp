#include "opdg/game.hpp"

#include "opdg/linalg.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace opdg {

int LtiDynamics::total_inputs() const {
  int m = 0;
  for (const auto& b : B) m += static_cast<int>(b.cols());
  return m;
}

int LtiDynamics::input_offset(int player) const {
  int off = 0;
  for (int j = 0; j < player; ++j) off += static_cast<int>(B[j].cols());
  return off;
}

std::string to_string(MethodTag tag) {
  switch (tag) {
    case MethodTag::kTfo:
      return "tfo";
    case MethodTag::kWtdo:
      return "wtdo";
    case MethodTag::kIdo:
      return "ido";
  }
  return "?";
}

MethodTag method_from_string(const std::string& name) {
  std::string lower;
  for (char c : name) lower += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (lower == "tfo") return MethodTag::kTfo;
  if (lower == "wtdo") return MethodTag::kWtdo;
  if (lower == "ido") return MethodTag::kIdo;
  throw std::invalid_argument("unknown identification method '" + name + "'");
}

std::string Violation::describe() const {
  std::ostringstream os;
  os << field << ": " << invariant << " (value " << value << ")";
  return os.str();
}

namespace {

std::string index_name(const std::string& base, int i) {
  return base + "[" + std::to_string(i + 1) + "]";
}

std::string index_name(const std::string& base, int i, int j) {
  return base + "[" + std::to_string(i + 1) + "," + std::to_string(j + 1) + "]";
}

double asymmetry(const MatrixXd& m) {
  const double scale = std::max(1.0, linalg::max_abs(m));
  return linalg::max_abs(m - m.transpose()) / scale;
}

bool all_finite(const MatrixXd& m) { return m.allFinite(); }

// Appends square/finite/symmetric violations; returns true when the matrix is
// usable for an eigenvalue test.
bool check_square_symmetric(const std::string& name, const MatrixXd& m, Eigen::Index dim,
                            std::vector<Violation>& out) {
  if (m.rows() != dim || m.cols() != dim) {
    out.push_back({name, "must be " + std::to_string(dim) + "x" + std::to_string(dim),
                   static_cast<double>(m.rows() * 1000 + m.cols())});
    return false;
  }
  if (!all_finite(m)) {
    out.push_back({name, "entries must be finite", std::nan("")});
    return false;
  }
  if (const double a = asymmetry(m); a >= tol::kSymmetry) {
    out.push_back({name, "must be symmetric", a});
    return false;
  }
  return true;
}

}  // namespace

std::vector<Violation> validate_game(const LqGame& game) {
  std::vector<Violation> out;
  const auto& dyn = game.dynamics;
  const Eigen::Index n = dyn.A.rows();

  if (n < 1) out.push_back({"A", "state dimension must be at least 1", static_cast<double>(n)});
  if (dyn.A.rows() != dyn.A.cols())
    out.push_back({"A", "must be square", static_cast<double>(dyn.A.cols())});
  if (!all_finite(dyn.A)) out.push_back({"A", "entries must be finite", std::nan("")});
  if (dyn.B.empty()) out.push_back({"B", "at least one player required", 0.0});

  for (int i = 0; i < dyn.players(); ++i) {
    const auto& b = dyn.B[i];
    if (b.rows() != n)
      out.push_back({index_name("B", i), "must have n rows", static_cast<double>(b.rows())});
    if (b.cols() < 1)
      out.push_back({index_name("B", i), "needs at least one input column", static_cast<double>(b.cols())});
    if (!all_finite(b)) out.push_back({index_name("B", i), "entries must be finite", std::nan("")});
  }

  if (game.costs.size() != dyn.B.size()) {
    out.push_back({"players", "cost count must equal number of B matrices",
                   static_cast<double>(game.costs.size())});
  }
  if (game.x0.size() != n)
    out.push_back({"x0", "must have length n", static_cast<double>(game.x0.size())});
  else if (!game.x0.allFinite())
    out.push_back({"x0", "entries must be finite", std::nan("")});

  const int players = std::min<int>(static_cast<int>(game.costs.size()), dyn.players());
  for (int i = 0; i < static_cast<int>(game.costs.size()); ++i) {
    const auto& cost = game.costs[i];
    const std::string qname = index_name("Q", i);
    if (check_square_symmetric(qname, cost.Q, n, out)) {
      const double lmin = linalg::min_eigenvalue(cost.Q);
      if (lmin < -tol::kPsd) out.push_back({qname, "must be positive semi-definite", lmin});
    }
    if (static_cast<int>(cost.R.size()) != dyn.players()) {
      out.push_back({index_name("R", i), "needs one matrix per player",
                     static_cast<double>(cost.R.size())});
      continue;
    }
    for (int j = 0; j < players; ++j) {
      const std::string rname = index_name("R", i, j);
      const Eigen::Index pj = dyn.B[j].cols();
      if (!check_square_symmetric(rname, cost.R[j], pj, out)) continue;
      const double lmin = linalg::min_eigenvalue(cost.R[j]);
      if (i == j && lmin < tol::kPd) {
        out.push_back({rname, "own-input penalty must be positive definite", lmin});
      } else if (i != j && lmin < -tol::kPsd) {
        // Indefinite cross terms are reported, not rejected by the solvers.
        out.push_back({rname, "cross penalty is not positive semi-definite", lmin});
      }
    }
  }
  return out;
}

MatrixXd stack_input_matrix(const LtiDynamics& dyn) {
  MatrixXd out(dyn.A.rows(), dyn.total_inputs());
  Eigen::Index col = 0;
  for (const auto& b : dyn.B) {
    out.middleCols(col, b.cols()) = b;
    col += b.cols();
  }
  return out;
}

MatrixXd player_rows(const LtiDynamics& dyn, const MatrixXd& stacked, int player) {
  return stacked.middleRows(dyn.input_offset(player), dyn.inputs(player));
}

std::optional<MatrixXd> symmetrized(const MatrixXd& m) {
  if (m.rows() != m.cols()) return std::nullopt;
  if (asymmetry(m) >= tol::kSymmetry) return std::nullopt;
  return linalg::sym(m);
}

LqGame symmetrize_game(const LqGame& game) {
  LqGame out = game;
  auto fix = [](MatrixXd& m, const std::string& name) {
    auto s = symmetrized(m);
    if (!s) throw std::invalid_argument(name + " is not symmetric");
    m = *s;
  };
  for (std::size_t i = 0; i < out.costs.size(); ++i) {
    fix(out.costs[i].Q, index_name("Q", static_cast<int>(i)));
    for (std::size_t j = 0; j < out.costs[i].R.size(); ++j) {
      fix(out.costs[i].R[j], index_name("R", static_cast<int>(i), static_cast<int>(j)));
    }
  }
  return out;
}

std::vector<Violation> validate_potential(const LqGame& game, const PotentialFunction& pot) {
  std::vector<Violation> out;
  const Eigen::Index n = game.states();
  const Eigen::Index m = game.dynamics.total_inputs();
  if (!check_square_symmetric("Qp", pot.Qp, n, out) || !check_square_symmetric("Rp", pot.Rp, m, out) ||
      !check_square_symmetric("Pp", pot.Pp, n, out)) {
    return out;
  }
  if (pot.Kp.rows() != m || pot.Kp.cols() != n) {
    out.push_back({"Kp", "must be m x n", static_cast<double>(pot.Kp.rows())});
    return out;
  }
  if (const double l = linalg::min_eigenvalue(pot.Qp); l < -tol::kPsd)
    out.push_back({"Qp", "must be positive semi-definite", l});
  if (const double l = linalg::min_eigenvalue(pot.Rp); l < tol::kPd)
    out.push_back({"Rp", "must be positive definite", l});
  if (const double l = linalg::min_eigenvalue(pot.Pp); l < -tol::kPsd)
    out.push_back({"Pp", "must be positive semi-definite", l});

  const MatrixXd B = stack_input_matrix(game.dynamics);
  const MatrixXd k = pot.Rp.ldlt().solve(B.transpose() * pot.Pp);
  const double scale = std::max(1.0, linalg::max_abs(pot.Kp));
  if (const double d = linalg::max_abs(k - pot.Kp) / scale; d > tol::kEq)
    out.push_back({"Kp", "must equal Rp^-1 B' Pp", d});

  if (pot.method == MethodTag::kTfo && pot.alpha) {
    const MatrixXd z = linalg::block_diag({pot.Qp, pot.Rp});
    const double lo = linalg::min_eigenvalue(z);
    const double hi = linalg::max_eigenvalue(z);
    if (lo < 1.0 - tol::kPsd) out.push_back({"blkdiag(Qp,Rp)", "must dominate I", lo});
    if (hi > *pot.alpha + tol::kPsd) out.push_back({"blkdiag(Qp,Rp)", "must be below alpha I", hi});
  }
  return out;
}

}  // namespace opdg
