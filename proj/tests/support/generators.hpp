#pragma once

#include "tinr/registry.hpp"
#include "tinr/trajectory.hpp"

#include <random>
#include <string>
#include <vector>

namespace tinr::testing {

using Rng = std::mt19937_64;

std::size_t uniform(Rng& rng, std::size_t lo, std::size_t hi);  // inclusive
bool coin(Rng& rng, double p = 0.5);

// Free text that parses back verbatim inside any block.
std::string random_text(Rng& rng, std::size_t max_len);

Json random_json_value(Rng& rng, int depth);
Json random_params(Rng& rng);

// A trajectory in which every turn is complete, drawn over `surfaces` with
// documentation from `docs` (parallel to surfaces).
Trajectory random_trajectory(Rng& rng, const std::vector<std::string>& surfaces, const std::vector<ToolDoc>& docs);

// Replace, insert or delete one byte.
std::string mutate_one_byte(Rng& rng, const std::string& text);

}  // namespace tinr::testing
