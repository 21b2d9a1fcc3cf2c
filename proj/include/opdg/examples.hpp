#pragma once

#include "opdg/game.hpp"

#include <string>
#include <vector>

namespace opdg {

/// Built-in games: "example1" (six states, two players with two inputs each)
/// and "example2" (human/automation vehicle manipulator).
LqGame example_game(const std::string& name);

std::vector<std::string> example_names();

}  // namespace opdg
