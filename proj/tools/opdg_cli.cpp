#include "opdg/errors.hpp"
#include "opdg/game_io.hpp"
#include "opdg/pipeline.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <iomanip>
#include <iostream>

namespace fs = std::filesystem;
using namespace opdg;

namespace {

enum Exit { kOk = 0, kInput = 2, kNumerical = 3, kInfeasible = 4 };

void emit(const Json& j, const std::string& out) {
  if (out.empty()) {
    write_json(std::cout, j);
  } else {
    write_json(out, j);
  }
}

int cmd_ne(const std::string& file, const std::string& out) {
  const LqGame game = load_game(file);
  const NeSolution ne = solve_coupled_are(game);
  emit(ne_to_json(game, ne), out);
  return kOk;
}

int cmd_identify(const std::string& file, const std::string& method, bool all, std::optional<double> snr,
                 std::uint64_t seed, const std::string& out) {
  const GameRun run = prepare_run(load_game(file));
  std::vector<MethodTag> methods;
  if (all) {
    methods = {MethodTag::kTfo, MethodTag::kWtdo, MethodTag::kIdo};
  } else {
    methods = {method_from_string(method)};
  }
  if (!out.empty()) {
    fs::create_directories(out);
    write_trajectory_csv(fs::path(out) / "trajectory_ne.csv", run.traj);
  }

  IdentOptions opts;
  opts.snr_db = snr;
  opts.seed = seed;
  opts.keep_trajectory = !out.empty();
  Json all_reports = Json::array();
  std::vector<IdentReport> reports;
  for (MethodTag m : methods) {
    IdentReport r = identify(run, m, opts);
    const Json j = report_to_json(r);
    if (!out.empty()) {
      write_json(fs::path(out) / ("report_" + to_string(m) + ".json"), j);
      if (r.potential_traj) write_trajectory_csv(fs::path(out) / ("trajectory_" + to_string(m) + ".csv"), *r.potential_traj);
    }
    if (!r.feasible) std::cerr << to_string(m) << ": " << r.message << '\n';
    all_reports.push_back(j);
    reports.push_back(std::move(r));
  }

  if (all) {
    std::cout << std::left << std::setw(8) << "method" << std::setw(10) << "feasible" << std::setw(14) << "e_x"
              << std::setw(12) << "time [s]" << "pass rate\n";
    for (const auto& r : reports) {
      std::cout << std::setw(8) << to_string(r.method) << std::setw(10) << (r.feasible ? "yes" : "no") << std::setw(14)
                << (r.e_x ? std::to_string(*r.e_x) : "-") << std::setw(12) << r.wall_time
                << (r.verification ? std::to_string(r.verification->pass_rate) : "-") << '\n';
    }
    if (out.empty()) write_json(std::cout, all_reports);
    return kOk;
  }
  if (out.empty()) write_json(std::cout, all_reports[0]);
  return reports[0].feasible ? kOk : kInfeasible;
}

int cmd_simulate(const std::string& file, std::optional<double> horizon, double step, const std::string& out) {
  const GameRun run = prepare_run(load_game(file), horizon, step);
  if (out.empty()) {
    write_trajectory_csv(std::cout, run.traj);
  } else {
    write_trajectory_csv(out, run.traj);
  }
  return kOk;
}

int cmd_verify(const std::string& file, const std::string& potential_file) {
  const GameRun run = prepare_run(load_game(file));
  PotentialFunction pot;
  try {
    pot = potential_from_json(read_json(potential_file));
  } catch (const ParseError& e) {
    throw ParseError(potential_file + ": " + e.what());
  }
  const OpdgReport rep = verify_opdg(run.game, run.ne, pot, run.traj);
  const ExactPotentialCheck ex = check_exact_potential(run.game, run.ne, pot);
  Json j = verification_to_json(rep);
  j["exact_potential"] = ex.exact;
  j["exact_residual"] = ex.residual;
  j["potential_violations"] = Json::array();
  for (const auto& v : validate_potential(run.game, pot)) j["potential_violations"].push_back(v.describe());
  write_json(std::cout, j);
  return kOk;
}

int cmd_reproduce(const std::string& which, int seeds, const std::string& out) {
  std::cout << reproduce(which, out.empty() ? fs::path("reproduce_" + which) : fs::path(out), seeds);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ordinal potential identification for linear-quadratic differential games"};
  app.require_subcommand(1);

  std::string file, out, method = "tfo", potential, which;
  std::optional<double> snr, horizon;
  double step = kDefaultStep;
  std::uint64_t seed = 1;
  int seeds = 11;
  bool all = false;

  auto* ne = app.add_subcommand("ne", "Feedback Nash equilibrium of a game file");
  ne->add_option("file", file, "Game JSON")->required();
  ne->add_option("--out", out, "Output JSON (default: stdout)");

  auto* id = app.add_subcommand("identify", "Identify a potential function");
  id->add_option("file", file, "Game JSON")->required();
  id->add_option("--method", method, "tfo, wtdo or ido")->check(CLI::IsMember({"tfo", "wtdo", "ido"}));
  id->add_flag("--all", all, "Run all three methods and print a comparison");
  id->add_option("--snr", snr, "Noise level in dB on the data trajectory (inf for none)");
  id->add_option("--seed", seed, "Noise seed");
  id->add_option("--out", out, "Directory for reports and trajectory CSVs");

  auto* sim = app.add_subcommand("simulate", "NE closed-loop trajectory as CSV");
  sim->add_option("file", file, "Game JSON")->required();
  sim->add_option("--horizon", horizon, "Seconds (default from the slowest closed-loop mode)");
  sim->add_option("--step", step, "RK4 step")->check(CLI::PositiveNumber);
  sim->add_option("--out", out, "Output CSV (default: stdout)");

  auto* ver = app.add_subcommand("verify", "Check a potential against a game's NE trajectory");
  ver->add_option("file", file, "Game JSON")->required();
  ver->add_option("potential", potential, "Potential JSON")->required();

  auto* rep = app.add_subcommand("reproduce", "Full artifact bundle for a built-in example");
  rep->add_option("which", which, "example1 or example2")->required()->check(CLI::IsMember({"example1", "example2"}));
  rep->add_option("--seeds", seeds, "Noise seeds per level")->check(CLI::PositiveNumber);
  rep->add_option("--out", out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInput;
  }

  try {
    if (*ne) return cmd_ne(file, out);
    if (*id) return cmd_identify(file, method, all, snr, seed, out);
    if (*sim) return cmd_simulate(file, horizon, step, out);
    if (*ver) return cmd_verify(file, potential);
    if (*rep) return cmd_reproduce(which, seeds, out);
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInput;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInput;
  } catch (const InfeasibleError& e) {
    std::cerr << "infeasible: " << e.what() << '\n';
    return kInfeasible;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumerical;
  }
  return kOk;
}
