#include "opdg/pipeline.hpp"

#include "opdg/examples.hpp"
#include "opdg/linalg.hpp"
#include "opdg/wtdo.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <thread>

namespace opdg {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Values printed for the built-in examples, shown next to the computed ones.
struct Reference {
  std::vector<MatrixXd> K;
  MatrixXd Qp, Rp;
  std::string qp_method;
  std::vector<std::pair<std::string, double>> e_x;
  std::vector<double> sweep_snr;
  std::vector<double> sweep_wtdo, sweep_ido;
};

Reference reference(const std::string& name) {
  Reference r;
  if (name == "example1") {
    MatrixXd K1(2, 6), K2(2, 6);
    K1 << -0.90, 2.26, 1.03, -0.55, -0.80, 0.40, -2.94, -1.04, 3.91, 1.43, -0.81, 0.89;
    K2 << -0.92, -0.25, 0.69, 2.71, -1.44, 2.04, -0.45, -0.55, 0.65, -0.78, -1.53, 1.31;
    r.K = {K1, K2};
    r.Qp.resize(6, 6);
    r.Qp << 16.75, -1.26, -2.62, -3.88, 0.73, 4.11, -1.26, 5.16, 1.17, 0.70, 0.56, 0.85, -2.62, 1.17, 6.10, 0.43,
        -0.26, -0.15, -3.88, 0.70, 0.43, 6.72, 0.56, 1.91, 0.73, 0.56, -0.26, 0.56, 11.21, -1.02, 4.11, 0.85, -0.15,
        1.91, -1.02, 2.87;
    r.Rp.resize(4, 4);
    r.Rp << 2.12, 0.39, 0.32, -0.08, 0.39, 2.06, -0.07, -0.10, 0.32, -0.07, 3.22, -0.87, -0.08, -0.10, -0.87, 6.84;
    r.qp_method = "tfo";
    r.e_x = {{"tfo", 0.019}, {"wtdo", 0.077}, {"ido", 0.076}};
  } else if (name == "example2") {
    MatrixXd Kh(1, 3), Ka(1, 3);
    Kh << -0.78, 0.26, 1.42;
    Ka << 0.42, 1.59, 0.83;
    r.K = {Kh, Ka};
    r.Qp.resize(3, 3);
    r.Qp << 0.82, 0.24, -0.48, 0.24, 0.59, -1.01, -0.48, -1.01, 2.15;
    r.Rp.resize(2, 2);
    r.Rp << 1.00, -0.05, -0.05, 1.60;
    r.qp_method = "wtdo";
    r.e_x = {{"wtdo", 0.002}, {"ido", 0.026}};
    r.sweep_snr = {10, 20, 30, 40, INFINITY};
    r.sweep_wtdo = {0.314, 0.107, 0.029, 0.027, 0.002};
    r.sweep_ido = {0.603, 0.265, 0.104, 0.047, 0.026};
  }
  return r;
}

std::string fmt(double v, int prec = 4) {
  if (std::isnan(v)) return "n/a";
  std::ostringstream os;
  os << std::setprecision(prec) << v;
  return os.str();
}

std::string snr_label(double snr) { return std::isinf(snr) ? "inf" : fmt(snr, 3); }

void matrix_pair_table(std::ostream& md, const MatrixXd& got, const MatrixXd& ref) {
  md << "| row | computed | reference |\n|---|---|---|\n";
  for (Eigen::Index r = 0; r < got.rows(); ++r) {
    md << "| " << r + 1 << " |";
    for (Eigen::Index c = 0; c < got.cols(); ++c) md << ' ' << std::fixed << std::setprecision(3) << got(r, c);
    md << " |";
    if (r < ref.rows())
      for (Eigen::Index c = 0; c < ref.cols(); ++c) md << ' ' << std::setprecision(2) << ref(r, c);
    md << " |\n" << std::defaultfloat;
  }
}

Json detail_tfo(const GameRun& run, const PotentialFunction& pot) {
  const TfoResiduals res = tfo_residuals(run.game, run.ne, pot);
  return {{"alpha", pot.alpha.value_or(NAN)},
          {"residuals", {{"riccati", res.riccati}, {"gain", res.gain}, {"direction", res.direction}}},
          {"feasibility", feasibility_to_json(check_feasibility(run.game, run.ne))}};
}

}  // namespace

GameRun prepare_run(const LqGame& game, std::optional<double> horizon, double step) {
  GameRun run;
  run.game = game;
  run.ne = solve_coupled_are(game);
  run.horizon = horizon.value_or(default_horizon(closed_loop(game, run.ne.K)));
  run.traj = simulate_closed_loop(game, run.ne.K, run.horizon, step);
  return run;
}

IdentReport identify(const GameRun& run, MethodTag method, const IdentOptions& opts) {
  IdentReport rep;
  rep.method = method;
  const Trajectory data = opts.snr_db ? add_noise(run.traj, *opts.snr_db, opts.seed) : run.traj;
  if (opts.snr_db) rep.details["snr_db"] = std::isinf(*opts.snr_db) ? Json("inf") : Json(*opts.snr_db);
  rep.details["seed"] = opts.seed;

  PotentialFunction pot;
  const auto t0 = Clock::now();
  try {
    switch (method) {
      case MethodTag::kTfo: {
        pot = solve_tfo(run.game, run.ne);
        rep.wall_time = seconds_since(t0);
        rep.details.update(detail_tfo(run, pot));
        break;
      }
      case MethodTag::kWtdo: {
        const auto crossings = extract_crossings(run.game, run.ne, data);
        const WtdoResult w = solve_wtdo(run.game, run.ne, crossings);
        rep.wall_time = seconds_since(t0);
        pot = w.potential;
        rep.details["eta"] = w.eta;
        rep.details["gain_deviation"] = w.gain_deviation;
        rep.details["crossings"] = w.crossings;
        break;
      }
      case MethodTag::kIdo: {
        const IdoResult r = solve_ido(run.game, run.ne, data, opts.ido);
        rep.wall_time = seconds_since(t0);
        pot = r.potential;
        rep.details["e_u"] = r.e_u;
        rep.details["hinge"] = r.hinge;
        rep.details["objective"] = r.objective;
        rep.details["evaluations"] = r.evaluations;
        rep.details["converged"] = r.converged;
        break;
      }
    }
  } catch (const InfeasibleTfo& e) {
    rep.wall_time = seconds_since(t0);
    rep.message = e.what();
    rep.details["infeasibility"] = e.infeasibility_measure();
    rep.details["feasibility"] = feasibility_to_json(e.report());
    return rep;
  } catch (const InfeasibleWtdo& e) {
    rep.wall_time = seconds_since(t0);
    rep.message = e.what();
    rep.details["infeasibility"] = e.infeasibility_measure();
    return rep;
  }

  const MatrixXd B = stack_input_matrix(run.game.dynamics);
  const AreSolution are = solve_single_are(run.game.A(), B, pot.Qp, pot.Rp);
  Trajectory ptraj = simulate_stacked(run.game, are.K, run.horizon, run.traj.step);
  rep.feasible = true;
  rep.e_x = trajectory_error(ptraj, run.traj).value;
  rep.verification = verify_opdg(run.game, run.ne, pot, run.traj);
  rep.details["potential_are_residual"] = are.residual;
  rep.details["gain_mismatch"] = linalg::max_abs(are.K - run.ne.stacked_gain());
  rep.potential = std::move(pot);
  if (opts.keep_trajectory) rep.potential_traj = std::move(ptraj);
  return rep;
}

Json feasibility_to_json(const FeasibilityReport& r) {
  Json ranks = Json::array();
  for (const auto& [a, b] : r.consistency_ranks) ranks.push_back({a, b});
  return {{"condition_a", r.condition_a},
          {"condition_b_value", r.condition_b_value},
          {"condition_b", r.condition_b},
          {"consistency_ranks", ranks},
          {"joint_rank", r.joint_rank},
          {"joint_unknowns", r.joint_unknowns},
          {"solution_space_dim", r.solution_space_dim},
          {"advisory", r.advisory}};
}

Json verification_to_json(const OpdgReport& r) {
  Json j = {{"pass_rate", r.pass_rate},
            {"checked", r.checked},
            {"violations", r.violations},
            {"worst_violation", r.worst_violation}};
  // Unmatched crossings have no finite misalignment.
  if (r.max_misalignment == std::numeric_limits<Eigen::Index>::max()) {
    j["max_misalignment"] = nullptr;
  } else {
    j["max_misalignment"] = r.max_misalignment;
  }
  j["crossings_orig"] = r.crossings_orig;
  j["crossings_pot"] = r.crossings_pot;
  return j;
}

Json report_to_json(const IdentReport& r) {
  Json j;
  j["method"] = to_string(r.method);
  j["feasible"] = r.feasible;
  j["wall_time_seconds"] = r.wall_time;
  if (r.e_x) j["e_x"] = *r.e_x;
  if (!r.message.empty()) j["message"] = r.message;
  if (r.potential) j["potential"] = potential_to_json(*r.potential);
  if (r.verification) j["verification"] = verification_to_json(*r.verification);
  j["details"] = r.details;
  return j;
}

double median(std::vector<double> v) {
  if (v.empty()) return NAN;
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

std::vector<SweepCell> noise_sweep(const GameRun& run, const std::vector<double>& snrs, int seeds,
                                   const std::vector<MethodTag>& methods, const IdoConfig& ido, unsigned threads) {
  if (seeds < 1) throw std::invalid_argument("noise sweep needs at least one seed");
  struct Task {
    std::size_t cell;
    int seed;
  };
  std::vector<SweepCell> cells;
  std::vector<Task> tasks;
  for (double snr : snrs)
    for (MethodTag m : methods) {
      SweepCell c;
      c.snr_db = snr;
      c.method = m;
      cells.push_back(c);
      for (int s = 1; s <= seeds; ++s) tasks.push_back({cells.size() - 1, s});
    }

  std::vector<double> result(tasks.size(), NAN);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < tasks.size(); k = next++) {
      const Task& t = tasks[k];
      IdentOptions o;
      o.snr_db = cells[t.cell].snr_db;
      o.seed = static_cast<std::uint64_t>(t.seed);
      o.ido = ido;
      try {
        const IdentReport r = identify(run, cells[t.cell].method, o);
        if (r.e_x) result[k] = *r.e_x;
      } catch (const std::exception&) {
        // counted as a failure below
      }
    }
  };
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(tasks.size()));
  std::vector<std::thread> pool;
  for (unsigned i = 1; i < threads; ++i) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  for (std::size_t k = 0; k < tasks.size(); ++k) {
    SweepCell& c = cells[tasks[k].cell];
    if (std::isnan(result[k])) {
      ++c.failures;
    } else {
      c.e_x.push_back(result[k]);
    }
  }
  for (auto& c : cells) {
    c.median = median(c.e_x);
    c.min = c.e_x.empty() ? NAN : *std::min_element(c.e_x.begin(), c.e_x.end());
    c.max = c.e_x.empty() ? NAN : *std::max_element(c.e_x.begin(), c.e_x.end());
  }
  return cells;
}

std::string reproduce(const std::string& example, const std::filesystem::path& out, int seeds) {
  namespace fs = std::filesystem;
  const LqGame game = example_game(example);
  const Reference ref = reference(example);
  fs::create_directories(out);

  const auto t_ne = Clock::now();
  const GameRun run = prepare_run(game);
  const double ne_time = seconds_since(t_ne);
  write_json(out / "game.json", game_to_json(game));
  write_json(out / "ne.json", ne_to_json(game, run.ne));
  write_trajectory_csv(out / "trajectory_ne.csv", run.traj);

  std::ostringstream md;
  md << "# " << example << "\n\n## Nash equilibrium\n\n";
  md << "Solved in " << fmt(ne_time, 3) << " s, coupled residual " << fmt(run.ne.residual, 3) << ", "
     << run.ne.iterations << " sweeps.\n\n";
  for (std::size_t i = 0; i < run.ne.K.size(); ++i) {
    md << "Player " << i + 1 << " gain:\n\n";
    matrix_pair_table(md, run.ne.K[i], i < ref.K.size() ? ref.K[i] : MatrixXd());
    md << '\n';
  }

  md << "## Identification\n\n| method | feasible | e_x | reference e_x | time [s] | pass rate | max misalignment |\n"
        "|---|---|---|---|---|---|---|\n";
  std::vector<IdentReport> reports;
  for (MethodTag m : {MethodTag::kTfo, MethodTag::kWtdo, MethodTag::kIdo}) {
    IdentOptions o;
    o.keep_trajectory = true;
    IdentReport r = identify(run, m, o);
    const std::string name = to_string(m);
    write_json(out / ("report_" + name + ".json"), report_to_json(r));
    double ref_ex = NAN;
    for (const auto& [k, v] : ref.e_x)
      if (k == name) ref_ex = v;
    md << "| " << name << " | " << (r.feasible ? "yes" : "no") << " | " << (r.e_x ? fmt(*r.e_x) : "-") << " | "
       << fmt(ref_ex) << " | " << fmt(r.wall_time, 3) << " | ";
    if (r.verification) {
      const auto mis = r.verification->max_misalignment;
      md << fmt(r.verification->pass_rate) << " | "
         << (mis == std::numeric_limits<Eigen::Index>::max() ? "unmatched" : std::to_string(mis)) << " |\n";
    } else {
      md << "- | - |\n";
    }
    if (r.feasible) {
      write_trajectory_csv(out / ("trajectory_" + name + ".csv"), *r.potential_traj);
      const HamiltonianGradients g = hamiltonian_gradients(game, run.ne, r.potential->Pp, run.traj);
      MatrixXd cols(g.orig.rows(), 2 * g.orig.cols());
      std::vector<std::string> names;
      for (Eigen::Index c = 0; c < g.orig.cols(); ++c) {
        cols.col(2 * c) = g.orig.col(c);
        cols.col(2 * c + 1) = g.pot.col(c);
        names.push_back("orig" + std::to_string(c + 1));
        names.push_back("pot" + std::to_string(c + 1));
      }
      write_series_csv(out / ("gradients_" + name + ".csv"), run.traj, cols, names);
    }
    reports.push_back(std::move(r));
  }
  for (const auto& r : reports)
    if (!r.feasible) md << "\n" << to_string(r.method) << ": " << r.message << "\n";

  for (const auto& r : reports) {
    if (to_string(r.method) != ref.qp_method || !r.potential) continue;
    md << "\n## Potential weights (" << ref.qp_method << ")\n\nQp:\n\n";
    matrix_pair_table(md, r.potential->Qp, ref.Qp);
    md << "\nRp:\n\n";
    matrix_pair_table(md, r.potential->Rp, ref.Rp);
  }

  if (!ref.sweep_snr.empty()) {
    const auto cells = noise_sweep(run, ref.sweep_snr, seeds, {MethodTag::kWtdo, MethodTag::kIdo});
    Json sweep = Json::array();
    md << "\n## Noise sweep (" << seeds << " seeds, median e_x)\n\n| SNR [dB] | wtdo | wtdo reference | ido | "
          "ido reference |\n|---|---|---|---|---|\n";
    for (std::size_t s = 0; s < ref.sweep_snr.size(); ++s) {
      const SweepCell& w = cells[2 * s];
      const SweepCell& i = cells[2 * s + 1];
      md << "| " << snr_label(w.snr_db) << " | " << fmt(w.median) << " | " << fmt(ref.sweep_wtdo[s]) << " | "
         << fmt(i.median) << " | " << fmt(ref.sweep_ido[s]) << " |\n";
      for (const SweepCell* c : {&w, &i})
        sweep.push_back({{"snr_db", std::isinf(c->snr_db) ? Json("inf") : Json(c->snr_db)},
                         {"method", to_string(c->method)},
                         {"median", c->median},
                         {"min", c->min},
                         {"max", c->max},
                         {"failures", c->failures},
                         {"e_x", c->e_x}});
    }
    write_json(out / "noise_sweep.json", sweep);
  }

  const std::string summary = md.str();
  std::ofstream(out / "summary.md") << summary;
  return summary;
}

}  // namespace opdg
