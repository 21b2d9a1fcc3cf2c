#pragma once

#include "opdg/game.hpp"
#include "opdg/game_io.hpp"
#include "opdg/ido.hpp"
#include "opdg/riccati.hpp"
#include "opdg/simulate.hpp"
#include "opdg/tfo.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace opdg {

/// A game with its NE and the noise-free NE trajectory.
struct GameRun {
  LqGame game;
  NeSolution ne;
  double horizon = 0.0;
  Trajectory traj;
};

GameRun prepare_run(const LqGame& game, std::optional<double> horizon = std::nullopt,
                    double step = kDefaultStep);

struct IdentOptions {
  std::optional<double> snr_db;  // noise on the data trajectory (WTDO, IDO)
  std::uint64_t seed = 1;
  IdoConfig ido;
  bool keep_trajectory = false;
};

struct IdentReport {
  MethodTag method = MethodTag::kTfo;
  bool feasible = false;
  std::optional<double> e_x;
  double wall_time = 0.0;  // identification solve only
  std::optional<PotentialFunction> potential;
  std::optional<OpdgReport> verification;
  std::optional<Trajectory> potential_traj;
  Json details = Json::object();
  std::string message;
};

/// Runs one identification, re-simulates the potential's own LQR law and
/// scores it against the noise-free NE trajectory. Infeasibility is
/// reported (feasible = false), numerical failures propagate.
IdentReport identify(const GameRun& run, MethodTag method, const IdentOptions& opts = {});

Json report_to_json(const IdentReport& r);
Json feasibility_to_json(const FeasibilityReport& r);
Json verification_to_json(const OpdgReport& r);

struct SweepCell {
  double snr_db = 0.0;
  MethodTag method = MethodTag::kWtdo;
  std::vector<double> e_x;  // successful seeds only
  int failures = 0;
  double median = 0.0;  // NaN when every seed failed
  double min = 0.0;
  double max = 0.0;
};

/// Every (snr, method, seed) identification on a worker pool; seeds 1..seeds.
std::vector<SweepCell> noise_sweep(const GameRun& run, const std::vector<double>& snrs, int seeds,
                                   const std::vector<MethodTag>& methods, const IdoConfig& ido = {},
                                   unsigned threads = 0);

double median(std::vector<double> v);

/// Writes the complete artifact bundle for a built-in example into `out`.
/// Returns the Markdown summary.
std::string reproduce(const std::string& example, const std::filesystem::path& out, int seeds = 11);

}  // namespace opdg
