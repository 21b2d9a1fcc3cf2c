// Acceptance criteria 1-9. Prints one PASS/FAIL line per criterion; run a
// single one with --criterion k.

#include "opdg/examples.hpp"
#include "opdg/linalg.hpp"
#include "opdg/pipeline.hpp"
#include "opdg/sdp.hpp"
#include "opdg/tfo.hpp"
#include "opdg/wtdo.hpp"

#include <chrono>
#include <cmath>
#include <cstring>
#include <functional>
#include <iostream>
#include <sstream>

using namespace opdg;

namespace {

constexpr double kGainTol = 0.005;
constexpr double kWeightTol = 0.15;
constexpr double kContractTol = 1e-6;
constexpr double kAreGainTol = 1e-4;
constexpr double kTfoErrorMax = 0.05;
constexpr double kTable1ErrorMax = 0.15;
constexpr double kWtdoExample2ErrorMax = 0.01;
constexpr double kWtdoTenDbMedianMax = 0.6;
constexpr int kSweepSeeds = 11;
constexpr Eigen::Index kMaxMisalignment = 1;
constexpr double kRiccatiResidualMax = 1e-9;
constexpr double kScalingTol = 1e-6;
constexpr double kOracleTol = 1e-6;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << "[fail] ";
    }
    detail << what << "; ";
  }
};

std::string num(double v) {
  std::ostringstream os;
  os.precision(4);
  os << v;
  return os.str();
}

double seconds(const std::function<void()>& f) {
  const auto t0 = std::chrono::steady_clock::now();
  f();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

MatrixXd rows(std::initializer_list<std::initializer_list<double>> r) {
  MatrixXd m(static_cast<Eigen::Index>(r.size()), static_cast<Eigen::Index>(r.begin()->size()));
  Eigen::Index i = 0;
  for (const auto& row : r) {
    Eigen::Index j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  return m;
}

// Printed reference values.
const std::vector<MatrixXd> kExample1Gains = {
    rows({{-0.90, 2.26, 1.03, -0.55, -0.80, 0.40}, {-2.94, -1.04, 3.91, 1.43, -0.81, 0.89}}),
    rows({{-0.92, -0.25, 0.69, 2.71, -1.44, 2.04}, {-0.45, -0.55, 0.65, -0.78, -1.53, 1.31}})};
const std::vector<MatrixXd> kExample2Gains = {rows({{-0.78, 0.26, 1.42}}), rows({{0.42, 1.59, 0.83}})};
const MatrixXd kExample1Qp = rows({{16.75, -1.26, -2.62, -3.88, 0.73, 4.11},
                                   {-1.26, 5.16, 1.17, 0.70, 0.56, 0.85},
                                   {-2.62, 1.17, 6.10, 0.43, -0.26, -0.15},
                                   {-3.88, 0.70, 0.43, 6.72, 0.56, 1.91},
                                   {0.73, 0.56, -0.26, 0.56, 11.21, -1.02},
                                   {4.11, 0.85, -0.15, 1.91, -1.02, 2.87}});
const MatrixXd kExample1Rp = rows({{2.12, 0.39, 0.32, -0.08},
                                   {0.39, 2.06, -0.07, -0.10},
                                   {0.32, -0.07, 3.22, -0.87},
                                   {-0.08, -0.10, -0.87, 6.84}});
const MatrixXd kExample2Qp = rows({{0.82, 0.24, -0.48}, {0.24, 0.59, -1.01}, {-0.48, -1.01, 2.15}});

void compare_gains(Outcome& o, const std::string& name, const std::vector<MatrixXd>& expect, double limit) {
  const LqGame g = example_game(name);
  NeSolution ne;
  const double t = seconds([&] { ne = solve_coupled_are(g); });
  double worst = 0.0;
  for (std::size_t i = 0; i < expect.size(); ++i) worst = std::max(worst, linalg::max_abs(ne.K[i] - expect[i]));
  o.require(worst <= kGainTol, "max |K - printed| = " + num(worst));
  o.require(t < limit, "runtime " + num(t) + " s");
}

const GameRun& run_of(const std::string& name) {
  static const GameRun r1 = prepare_run(example_game("example1"));
  static const GameRun r2 = prepare_run(example_game("example2"));
  return name == "example1" ? r1 : r2;
}

const std::vector<IdentReport>& example1_reports() {
  static const std::vector<IdentReport> reps = [] {
    std::vector<IdentReport> out;
    for (MethodTag m : {MethodTag::kTfo, MethodTag::kWtdo, MethodTag::kIdo}) out.push_back(identify(run_of("example1"), m));
    return out;
  }();
  return reps;
}

Outcome criterion1() {
  Outcome o;
  compare_gains(o, "example1", kExample1Gains, 5.0);
  return o;
}

Outcome criterion2() {
  Outcome o;
  compare_gains(o, "example2", kExample2Gains, 1.0);
  return o;
}

Outcome criterion3() {
  Outcome o;
  const GameRun& run = run_of("example1");
  PotentialFunction pot;
  try {
    pot = solve_tfo(run.game, run.ne);
  } catch (const InfeasibleTfo& e) {
    o.require(false, std::string("TFO infeasible: ") + e.what());
    return o;
  }
  o.require(linalg::max_abs(pot.Qp - kExample1Qp) <= kWeightTol, "max |Qp - printed| = " + num(linalg::max_abs(pot.Qp - kExample1Qp)));
  o.require(linalg::max_abs(pot.Rp - kExample1Rp) <= kWeightTol, "max |Rp - printed| = " + num(linalg::max_abs(pot.Rp - kExample1Rp)));
  const TfoResiduals r = tfo_residuals(run.game, run.ne, pot);
  o.require(std::max({r.riccati, r.gain, r.direction}) < kContractTol, "residuals " + num(r.riccati) + "/" + num(r.gain) + "/" + num(r.direction));
  const MatrixXd Z = linalg::block_diag({pot.Qp, pot.Rp});
  o.require(linalg::min_eigenvalue(Z) >= 1.0 - kContractTol && linalg::max_eigenvalue(Z) <= pot.alpha.value_or(0.0) + kContractTol,
            "sandwich [" + num(linalg::min_eigenvalue(Z)) + ", " + num(linalg::max_eigenvalue(Z)) + "]");
  const AreSolution are = solve_single_are(run.game.A(), stack_input_matrix(run.game.dynamics), pot.Qp, pot.Rp);
  const double dk = linalg::max_abs(are.K - run.ne.stacked_gain());
  o.require(dk <= kAreGainTol, "ARE gain mismatch " + num(dk));
  return o;
}

Outcome criterion4() {
  Outcome o;
  const auto& reps = example1_reports();
  const double limits[3] = {kTfoErrorMax, kTable1ErrorMax, kTable1ErrorMax};
  for (std::size_t k = 0; k < 3; ++k) {
    const IdentReport& r = reps[k];
    const std::string name = to_string(r.method);
    if (!r.feasible) {
      o.require(false, name + " infeasible");
      continue;
    }
    o.require(*r.e_x >= 0.0 && *r.e_x <= limits[k], name + " e_x " + num(*r.e_x));
  }
  o.require(reps[0].wall_time < reps[1].wall_time && reps[1].wall_time < reps[2].wall_time,
            "times " + num(reps[0].wall_time) + " < " + num(reps[1].wall_time) + " < " + num(reps[2].wall_time));
  return o;
}

Outcome criterion5() {
  Outcome o;
  const GameRun& run = run_of("example2");
  try {
    solve_tfo(run.game, run.ne);
    o.require(false, "TFO returned a solution");
  } catch (const InfeasibleTfo& e) {
    o.require(true, "InfeasibleTfo (measure " + num(e.infeasibility_measure()) + ")");
    o.require(e.report().condition_b_value == 0.0, "condition_b_value " + num(e.report().condition_b_value));
  }
  return o;
}

Outcome criterion6() {
  Outcome o;
  const IdentReport r = identify(run_of("example2"), MethodTag::kWtdo);
  if (!r.feasible) {
    o.require(false, "WTDO infeasible: " + r.message);
    return o;
  }
  const double dq = linalg::max_abs(r.potential->Qp - kExample2Qp);
  o.require(dq <= kWeightTol, "max |Qp - printed| = " + num(dq));
  o.require(*r.e_x <= kWtdoExample2ErrorMax, "e_x " + num(*r.e_x));
  return o;
}

Outcome criterion7() {
  Outcome o;
  const std::vector<double> snrs = {10.0, 20.0, 30.0, 40.0};
  const auto cells = noise_sweep(run_of("example2"), snrs, kSweepSeeds, {MethodTag::kWtdo, MethodTag::kIdo});
  std::vector<double> wtdo, ido;
  for (std::size_t s = 0; s < snrs.size(); ++s) {
    wtdo.push_back(cells[2 * s].median);
    ido.push_back(cells[2 * s + 1].median);
    o.detail << num(snrs[s]) << " dB: wtdo " << num(wtdo.back()) << " ido " << num(ido.back()) << "; ";
  }
  for (std::size_t s = 0; s + 1 < snrs.size(); ++s) {
    o.require(wtdo[s + 1] <= wtdo[s], "wtdo monotone " + num(snrs[s]) + "->" + num(snrs[s + 1]));
    o.require(ido[s + 1] <= ido[s], "ido monotone " + num(snrs[s]) + "->" + num(snrs[s + 1]));
  }
  for (std::size_t s = 0; s < snrs.size(); ++s) o.require(wtdo[s] < ido[s], "wtdo < ido at " + num(snrs[s]) + " dB");
  o.require(wtdo[0] <= kWtdoTenDbMedianMax, "wtdo median at 10 dB " + num(wtdo[0]));
  return o;
}

Outcome criterion8() {
  Outcome o;
  std::vector<std::pair<std::string, IdentReport>> all;
  for (const auto& r : example1_reports()) all.emplace_back("example1", r);
  for (MethodTag m : {MethodTag::kWtdo, MethodTag::kIdo}) all.emplace_back("example2", identify(run_of("example2"), m));
  for (const auto& [name, r] : all) {
    if (!r.feasible) continue;
    const OpdgReport& v = *r.verification;
    const std::string tag = name + "/" + to_string(r.method);
    o.require(v.pass_rate == 1.0, tag + " pass rate " + num(v.pass_rate));
    o.require(v.max_misalignment <= kMaxMisalignment,
              tag + " misalignment " +
                  (v.max_misalignment == std::numeric_limits<Eigen::Index>::max() ? std::string("unmatched")
                                                                                  : std::to_string(v.max_misalignment)));
  }
  return o;
}

Outcome criterion9() {
  Outcome o;
  // Riccati re-substitution.
  double worst = 0.0;
  for (const auto& name : example_names()) {
    const NeSolution ne = solve_coupled_are(example_game(name));
    worst = std::max(worst, ne.residual);
  }
  o.require(worst < kRiccatiResidualMax, "coupled residual " + num(worst));

  // Scaling invariance.
  const LqGame g = example_game("example1");
  const MatrixXd B = stack_input_matrix(g.dynamics);
  const MatrixXd R = linalg::block_diag({g.R(0, 0), g.R(1, 1)});
  const MatrixXd K = solve_single_are(g.A(), B, g.Q(0), R).K;
  double dk = 0.0;
  for (double gamma : {0.5, 2.0, 10.0})
    dk = std::max(dk, linalg::max_abs(solve_single_are(g.A(), B, gamma * g.Q(0), gamma * R).K - K));
  o.require(dk <= kScalingTol, "scaling invariance " + num(dk));

  // SDP oracles and the independent checker.
  using namespace sdp;
  std::vector<std::pair<SdpProblem, double>> probs;
  {
    SdpProblem p;
    p.add_scalar("q");
    p.add_scalar("r");
    p.add_scalar("alpha");
    const AffineMatrix D = block_diag({p.var("q"), p.var("r")});
    p.add_equality(p.var("q") - MatrixXd::Constant(1, 1, 3.0), "q");
    p.add_equality(p.var("r") - MatrixXd::Constant(1, 1, 1.0), "r");
    p.add_psd(D - MatrixXd::Identity(2, 2), "lower");
    p.add_psd(scalar_times(p.var("alpha"), MatrixXd::Identity(2, 2)) - D, "upper");
    p.minimize(p.var("alpha"));
    probs.emplace_back(p, 3.0);
  }
  {
    SdpProblem p;
    p.add_scalar("t");
    p.add_psd(scalar_times(p.var("t"), MatrixXd::Identity(2, 2)) + rows({{0.0, 1.0}, {1.0, 0.0}}), "block");
    p.minimize(p.var("t"));
    probs.emplace_back(p, 1.0);
  }
  {
    SdpProblem p;
    p.add_scalar("z1");
    p.add_scalar("z2");
    p.add_scalar("z3");
    const AffineMatrix F = scalar_times(p.var("z1"), rows({{0.3, 0.15, -0.2}, {0.15, -0.4, 0.65}, {-0.2, 0.65, 0.6}})) +
                           scalar_times(p.var("z2"), rows({{-0.1, -0.45, -0.15}, {-0.45, -0.1, 0.5}, {-0.15, 0.5, 0.6}})) +
                           scalar_times(p.var("z3"), rows({{0.2, 0.15, -0.75}, {0.15, 0.2, -0.45}, {-0.75, -0.45, -0.1}})) +
                           2.0 * MatrixXd::Identity(3, 3);
    p.add_psd(F, "lmi");
    p.minimize(0.8 * p.var("z1") + 0.3 * p.var("z2"));
    probs.emplace_back(p, -2.6056818);
  }
  for (std::size_t k = 0; k < probs.size(); ++k) {
    const SdpSolution s = solve_sdp(probs[k].first);
    const bool ok = s.status == SdpStatus::kOptimal && check_solution(probs[k].first, s.x).satisfied() &&
                    std::abs(s.objective_value - probs[k].second) <= kOracleTol;
    o.require(ok, "sdp oracle " + std::to_string(k + 1) + " " + num(s.objective_value));
  }

  // RK4 step halving on x' = [[-1, 2], [-2, -1]] x.
  LqGame rot;
  rot.dynamics.A = rows({{-1.0, 2.0}, {-2.0, -1.0}});
  rot.dynamics.B = {rows({{0.0}, {1.0}})};
  rot.costs = {PlayerCost{MatrixXd::Identity(2, 2), {MatrixXd::Identity(1, 1)}}};
  rot.x0 = VectorXd::Ones(2);
  const double T = 2.0;
  const VectorXd exact =
      std::exp(-T) * rows({{std::cos(2 * T), std::sin(2 * T)}, {-std::sin(2 * T), std::cos(2 * T)}}) * rot.x0;
  const MatrixXd K0 = MatrixXd::Zero(1, 2);
  const double e1 = (simulate_stacked(rot, K0, T, 0.04).x.bottomRows(1).transpose() - exact).norm();
  const double e2 = (simulate_stacked(rot, K0, T, 0.02).x.bottomRows(1).transpose() - exact).norm();
  o.require(std::abs(std::log2(e1 / e2) - 4.0) < 0.3, "RK4 order " + num(std::log2(e1 / e2)));

  // Exact implies ordinal on a symmetric-cost game.
  LqGame sym;
  sym.dynamics.A = rows({{0.2, 1.0}, {-0.5, -0.3}});
  sym.dynamics.B = {rows({{1.0}, {0.0}}), rows({{0.3}, {1.0}})};
  const MatrixXd Q = rows({{2.0, 0.3}, {0.3, 1.0}});
  const MatrixXd one = MatrixXd::Identity(1, 1);
  sym.costs = {PlayerCost{Q, {one, one}}, PlayerCost{Q, {one, one}}};
  sym.x0 = rows({{1.0}, {-1.5}});
  const NeSolution ne = solve_coupled_are(sym);
  PotentialFunction pot;
  pot.Qp = Q;
  pot.Rp = MatrixXd::Identity(2, 2);
  const AreSolution are = solve_single_are(sym.A(), stack_input_matrix(sym.dynamics), pot.Qp, pot.Rp);
  pot.Pp = are.P;
  pot.Kp = are.K;
  const bool exact_ok = check_exact_potential(sym, ne, pot).exact;
  const Trajectory t = simulate_closed_loop(sym, ne.K, 10.0);
  bool ordinal = true;
  for (const Trajectory& tr : {t, add_noise(t, 10.0, 1)}) ordinal = ordinal && verify_opdg(sym, ne, pot, tr).pass_rate == 1.0;
  o.require(exact_ok && ordinal, "exact => ordinal");
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::function<Outcome()>> criteria = {criterion1, criterion2, criterion3, criterion4, criterion5,
                                                          criterion6, criterion7, criterion8, criterion9};
  int only = 0;
  for (int a = 1; a + 1 < argc; ++a)
    if (std::strcmp(argv[a], "--criterion") == 0) only = std::atoi(argv[a + 1]);
  if (only < 0 || only > static_cast<int>(criteria.size())) {
    std::cerr << "criterion must be 1.." << criteria.size() << '\n';
    return 2;
  }

  bool all = true;
  for (int k = 1; k <= static_cast<int>(criteria.size()); ++k) {
    if (only && k != only) continue;
    Outcome o;
    try {
      o = criteria[k - 1]();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << "exception: " << e.what();
    }
    std::cout << "CRITERION " << k << ": " << (o.pass ? "PASS" : "FAIL") << "  " << o.detail.str() << std::endl;
    all = all && o.pass;
  }
  return all ? 0 : 1;
}
