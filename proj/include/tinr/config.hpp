#pragma once

#include "tinr/driver.hpp"
#include "tinr/json_value.hpp"
#include "tinr/registry.hpp"
#include "tinr/rewards.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>

namespace tinr {

// INI layout (JSON with the same sections as objects is also accepted):
//
//   [registry]       path, strategy, branching
//   [datasets]       <split> = <path>
//   [reward]         epsilon, group_size, multi_step_scoring
//   [dataconstruct]  k, retrieved_count, seed
//   [losses]         alpha, beta
//   [service]        bind_address, port, max_concurrent
//   [driver]         max_steps, max_chars
//
// Relative paths are kept as written and resolved against the directory of
// the config file.
struct Config {
    std::string registry_path;
    IndexStrategy strategy = IndexStrategy::Atomic;
    std::size_t branching = 10;
    std::map<std::string, std::string> dataset_paths;

    struct Reward {
        double epsilon = kDefaultEpsilon;
        std::size_t group_size = kDefaultGroupSize;
        ScoringMode multi_step_scoring = ScoringMode::FinalStep;
        bool operator==(const Reward&) const = default;
    } reward;

    struct DataConstruct {
        std::size_t k = 10;
        std::size_t retrieved_count = 5;
        std::uint64_t seed = 0;
        bool operator==(const DataConstruct&) const = default;
    } dataconstruct;

    struct Losses {
        double alpha = 1.0;
        double beta = 1.0;
        bool operator==(const Losses&) const = default;
    } losses;

    struct Service {
        std::string bind_address = "127.0.0.1";
        int port = 8080;
        std::size_t max_concurrent = 64;
        bool operator==(const Service&) const = default;
    } service;

    std::size_t max_steps = Budget{}.max_steps;
    std::size_t max_chars = Budget{}.max_chars;

    std::filesystem::path base_dir;  // not part of equality

    std::filesystem::path resolve(const std::string& path) const;
    std::filesystem::path dataset_path(const std::string& split) const;  // throws InvalidConfig if absent
    Budget budget() const { return {max_steps, max_chars}; }

    bool operator==(const Config& other) const;
};

// Throws ValidationError("InvalidConfig") on unknown keys or out-of-range
// values, IoError when a referenced path does not exist (if `check_paths`).
Config parse_config(std::string_view text, const std::filesystem::path& base_dir = {}, bool check_paths = true);
Config load_config(const std::filesystem::path& path, bool check_paths = true);

std::string render_config(const Config& config);
Json config_to_json(const Config& config);

}  // namespace tinr
