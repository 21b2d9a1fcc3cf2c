#include "opdg/game_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

namespace opdg {

namespace {

constexpr int kDigits = std::numeric_limits<double>::max_digits10;

const Json& field(const Json& j, const char* key, const std::string& where) {
  if (!j.is_object()) throw ParseError(where + ": expected an object");
  const auto it = j.find(key);
  if (it == j.end()) throw ParseError(where + ": missing field \"" + key + "\"");
  return *it;
}

std::string child(const std::string& where, const std::string& key) {
  return where.empty() ? key : where + "." + key;
}

std::string index(const std::string& where, std::size_t i) { return where + "[" + std::to_string(i) + "]"; }

double number(const Json& j, const std::string& where) {
  if (!j.is_number()) throw ParseError(where + ": expected a number");
  return j.get<double>();
}

VectorXd vector_from_json(const Json& j, const std::string& where) {
  if (!j.is_array()) throw ParseError(where + ": expected an array of numbers");
  VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = number(j[i], index(where, i));
  return v;
}

std::vector<MatrixXd> matrices_from_json(const Json& j, const std::string& where) {
  if (!j.is_array()) throw ParseError(where + ": expected a list of matrices");
  std::vector<MatrixXd> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(matrix_from_json(j[i], index(where, i)));
  return out;
}

Json matrices_to_json(const std::vector<MatrixXd>& ms) {
  Json j = Json::array();
  for (const auto& m : ms) j.push_back(matrix_to_json(m));
  return j;
}

// nlohmann prints the shortest round-trip form; the output is re-serialized
// with max_digits10 so every double carries 17 significant digits.
void dump(std::ostream& os, const Json& j, int indent) {
  const std::string pad(static_cast<std::size_t>(indent), ' ');
  const std::string inner(static_cast<std::size_t>(indent + 2), ' ');
  if (j.is_number_float()) {
    const double v = j.get<double>();
    if (std::isfinite(v)) {
      os << std::setprecision(kDigits) << v;
    } else {
      os << "null";
    }
  } else if (j.is_array()) {
    const bool flat = std::all_of(j.begin(), j.end(), [](const Json& e) { return e.is_primitive(); });
    if (j.empty()) {
      os << "[]";
    } else if (flat) {
      os << '[';
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) os << ", ";
        dump(os, j[i], indent);
      }
      os << ']';
    } else {
      os << "[\n";
      for (std::size_t i = 0; i < j.size(); ++i) {
        os << inner;
        dump(os, j[i], indent + 2);
        os << (i + 1 < j.size() ? ",\n" : "\n");
      }
      os << pad << ']';
    }
  } else if (j.is_object()) {
    if (j.empty()) {
      os << "{}";
      return;
    }
    os << "{\n";
    std::size_t i = 0;
    for (auto it = j.begin(); it != j.end(); ++it, ++i) {
      os << inner << Json(it.key()).dump() << ": ";
      dump(os, it.value(), indent + 2);
      os << (i + 1 < j.size() ? ",\n" : "\n");
    }
    os << pad << '}';
  } else {
    os << j.dump();
  }
}

}  // namespace

Json matrix_to_json(const MatrixXd& m) {
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

MatrixXd matrix_from_json(const Json& j, const std::string& where) {
  // A bare number is a 1x1 matrix and a flat array a single row.
  if (j.is_number()) return MatrixXd::Constant(1, 1, j.get<double>());
  if (!j.is_array() || j.empty()) throw ParseError(where + ": expected a non-empty matrix");
  if (!j[0].is_array()) return vector_from_json(j, where).transpose();
  const std::size_t cols = j[0].size();
  MatrixXd m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < j.size(); ++r) {
    const std::string rw = index(where, r);
    if (!j[r].is_array() || j[r].size() != cols)
      throw ParseError(rw + ": expected a row of " + std::to_string(cols) + " numbers");
    for (std::size_t c = 0; c < cols; ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = number(j[r][c], index(rw, c));
  }
  return m;
}

LqGame game_from_json(const Json& j) {
  LqGame g;
  g.dynamics.A = matrix_from_json(field(j, "A", "game"), "A");
  g.dynamics.B = matrices_from_json(field(j, "B", "game"), "B");
  const Json& players = field(j, "players", "game");
  if (!players.is_array()) throw ParseError("players: expected a list");
  for (std::size_t i = 0; i < players.size(); ++i) {
    const std::string w = index("players", i);
    PlayerCost c;
    c.Q = matrix_from_json(field(players[i], "Q", w), child(w, "Q"));
    c.R = matrices_from_json(field(players[i], "R", w), child(w, "R"));
    g.costs.push_back(std::move(c));
  }
  g.x0 = vector_from_json(field(j, "x0", "game"), "x0");
  return g;
}

Json game_to_json(const LqGame& game) {
  Json j;
  j["A"] = matrix_to_json(game.A());
  j["B"] = matrices_to_json(game.dynamics.B);
  Json players = Json::array();
  for (const auto& c : game.costs) players.push_back({{"Q", matrix_to_json(c.Q)}, {"R", matrices_to_json(c.R)}});
  j["players"] = players;
  j["x0"] = std::vector<double>(game.x0.data(), game.x0.data() + game.x0.size());
  return j;
}

Json ne_to_json(const LqGame& game, const NeSolution& ne) {
  Json j;
  j["P"] = matrices_to_json(ne.P);
  j["K"] = matrices_to_json(ne.K);
  j["residual"] = ne.residual;
  j["iterations"] = ne.iterations;
  const Eigen::VectorXcd ev = closed_loop(game, ne.K).eigenvalues();
  Json eig = Json::array();
  for (Eigen::Index k = 0; k < ev.size(); ++k) eig.push_back({ev(k).real(), ev(k).imag()});
  j["closed_loop_eigenvalues"] = eig;
  return j;
}

NeSolution ne_from_json(const Json& j) {
  NeSolution ne;
  ne.P = matrices_from_json(field(j, "P", "ne"), "P");
  ne.K = matrices_from_json(field(j, "K", "ne"), "K");
  if (j.contains("residual")) ne.residual = number(j["residual"], "residual");
  return ne;
}

Json potential_to_json(const PotentialFunction& pot) {
  Json j;
  j["method"] = to_string(pot.method);
  j["Qp"] = matrix_to_json(pot.Qp);
  j["Rp"] = matrix_to_json(pot.Rp);
  j["Pp"] = matrix_to_json(pot.Pp);
  j["Kp"] = matrix_to_json(pot.Kp);
  if (!pot.omega.empty()) j["omega"] = matrices_to_json(pot.omega);
  if (pot.alpha) j["alpha"] = *pot.alpha;
  return j;
}

PotentialFunction potential_from_json(const Json& j) {
  PotentialFunction pot;
  const Json& m = field(j, "method", "potential");
  if (!m.is_string()) throw ParseError("method: expected a string");
  try {
    pot.method = method_from_string(m.get<std::string>());
  } catch (const std::invalid_argument& e) {
    throw ParseError(std::string("method: ") + e.what());
  }
  pot.Qp = matrix_from_json(field(j, "Qp", "potential"), "Qp");
  pot.Rp = matrix_from_json(field(j, "Rp", "potential"), "Rp");
  pot.Pp = matrix_from_json(field(j, "Pp", "potential"), "Pp");
  pot.Kp = matrix_from_json(field(j, "Kp", "potential"), "Kp");
  if (j.contains("omega")) pot.omega = matrices_from_json(j["omega"], "omega");
  if (j.contains("alpha")) pot.alpha = number(j["alpha"], "alpha");
  return pot;
}

Json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string() + ": cannot open file");
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void write_json(std::ostream& out, const Json& j) {
  dump(out, j, 0);
  out << '\n';
}

void write_json(const std::filesystem::path& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(path.string() + ": cannot write file");
  write_json(out, j);
}

LqGame load_game(const std::filesystem::path& path) {
  const Json j = read_json(path);
  LqGame game;
  try {
    game = game_from_json(j);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  const auto violations = validate_game(game);
  if (!violations.empty()) {
    std::ostringstream os;
    os << path.string() << ": invalid game";
    for (const auto& v : violations) os << "\n  " << v.describe();
    throw ParseError(os.str());
  }
  try {
    return symmetrize_game(game);
  } catch (const std::invalid_argument& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void write_trajectory_csv(std::ostream& out, const Trajectory& traj) {
  out << std::setprecision(kDigits) << 't';
  for (Eigen::Index i = 0; i < traj.x.cols(); ++i) out << ",x" << i + 1;
  for (Eigen::Index i = 0; i < traj.u.cols(); ++i) out << ",u" << i + 1;
  out << '\n';
  for (Eigen::Index k = 0; k < traj.samples(); ++k) {
    out << traj.time(k);
    for (Eigen::Index i = 0; i < traj.x.cols(); ++i) out << ',' << traj.x(k, i);
    for (Eigen::Index i = 0; i < traj.u.cols(); ++i) out << ',' << traj.u(k, i);
    out << '\n';
  }
}

void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(path.string() + ": cannot write file");
  write_trajectory_csv(out, traj);
}

void write_series_csv(const std::filesystem::path& path, const Trajectory& grid, const MatrixXd& columns,
                      const std::vector<std::string>& names) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(path.string() + ": cannot write file");
  out << std::setprecision(kDigits) << 't';
  for (const auto& n : names) out << ',' << n;
  out << '\n';
  for (Eigen::Index k = 0; k < columns.rows(); ++k) {
    out << grid.time(k);
    for (Eigen::Index c = 0; c < columns.cols(); ++c) out << ',' << columns(k, c);
    out << '\n';
  }
}

}  // namespace opdg
