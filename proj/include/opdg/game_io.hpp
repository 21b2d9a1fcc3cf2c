#pragma once

#include "opdg/game.hpp"
#include "opdg/riccati.hpp"
#include "opdg/simulate.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <ostream>
#include <stdexcept>
#include <string>

namespace opdg {

/// Malformed or schema-violating input. The message names the location.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Json = nlohmann::ordered_json;

Json matrix_to_json(const MatrixXd& m);
/// `where` names the field in error messages, e.g. "players[1].R[0]".
MatrixXd matrix_from_json(const Json& j, const std::string& where);

/// {"A", "B", "players": [{"Q", "R"}], "x0"} with row-major nested arrays.
LqGame game_from_json(const Json& j);
Json game_to_json(const LqGame& game);

Json ne_to_json(const LqGame& game, const NeSolution& ne);
NeSolution ne_from_json(const Json& j);

Json potential_to_json(const PotentialFunction& pot);
PotentialFunction potential_from_json(const Json& j);

Json read_json(const std::filesystem::path& path);
/// Writes with two-space indentation; doubles keep 17 significant digits.
void write_json(const std::filesystem::path& path, const Json& j);
void write_json(std::ostream& out, const Json& j);

/// Parses, symmetrizes and validates; throws ParseError on any failure.
LqGame load_game(const std::filesystem::path& path);

/// Header t,x1..xn,u1..um, one row per sample.
void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj);
void write_trajectory_csv(std::ostream& out, const Trajectory& traj);
/// Header t then one column per name.
void write_series_csv(const std::filesystem::path& path, const Trajectory& grid, const MatrixXd& columns,
                      const std::vector<std::string>& names);

}  // namespace opdg
