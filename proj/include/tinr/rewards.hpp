#pragma once

#include "tinr/registry.hpp"
#include "tinr/trajectory.hpp"

#include <algorithm>
#include <cstddef>
#include <iterator>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace tinr {

// |a ∩ b| / |a ∪ b|, with jaccard(∅, ∅) = 1.
template <class T, class Compare>
double jaccard(const std::set<T, Compare>& a, const std::set<T, Compare>& b) {
    if (a.empty() && b.empty()) return 1.0;
    std::size_t shared = 0;
    auto i = a.begin();
    auto j = b.begin();
    const auto& less = a.key_comp();
    while (i != a.end() && j != b.end()) {
        if (less(*i, *j)) {
            ++i;
        } else if (less(*j, *i)) {
            ++j;
        } else {
            ++shared;
            ++i;
            ++j;
        }
    }
    const std::size_t united = a.size() + b.size() - shared;
    return static_cast<double>(shared) / static_cast<double>(united);
}

using ParamPair = std::pair<std::string, std::string>;  // (name, canonical JSON value)

std::set<std::string> token_set(const std::vector<ToolCall>& calls);
std::set<ParamPair> param_set(const ToolCall& call);

// For every ground-truth call, the index of the predicted call matched to it:
// the first not-yet-matched prediction with the same token surface.
std::vector<std::optional<std::size_t>> match_calls(const std::vector<ToolCall>& pred,
                                                    const std::vector<ToolCall>& gt);

double reward_tool(const std::vector<ToolCall>& pred, const std::vector<ToolCall>& gt);

// Mean over ground-truth calls of the parameter-set Jaccard against the
// matched prediction (0 for unmatched). With no ground-truth calls: 1 if
// the prediction is empty too, else 0.
double reward_param(const std::vector<ToolCall>& pred, const std::vector<ToolCall>& gt);

struct RewardBreakdown {
    double format = 0.0;
    double tool = 0.0;
    double param = 0.0;
    double total = 0.0;
    std::vector<std::string> diagnostics;

    Json to_json() const;
};

enum class ScoringMode { FinalStep, PerStep };

std::string_view to_string(ScoringMode mode);
ScoringMode scoring_mode_from_string(std::string_view name);

using StepCalls = std::vector<std::vector<ToolCall>>;

// R = R_format + r_tool + r_param for one policy output. Total function.
RewardBreakdown score(std::string_view text, const StepCalls& gt_steps, const ToolRegistry& registry,
                      ScoringMode mode = ScoringMode::FinalStep);

inline constexpr double kDefaultEpsilon = 0.2;
inline constexpr std::size_t kDefaultGroupSize = 8;
inline constexpr double kDegenerateStd = 1e-8;

struct GroupAdvantages {
    std::vector<double> rewards;
    std::vector<double> advantages;
    double epsilon_clip = kDefaultEpsilon;
    bool degenerate = false;

    Json to_json() const;
};

// A_i = (R_i - mean) / std with the population std; all zeros when std < 1e-8.
// Throws ValidationError("GroupTooSmall" | "NonFiniteInput").
GroupAdvantages group_advantages(std::span<const double> rewards, double epsilon_clip = kDefaultEpsilon);

// (1/G) Σ min(ρ_i A_i, clip(ρ_i, 1-ε, 1+ε) A_i), ρ_i = exp(logp_new_i - logp_old_i).
// No KL term. Throws ValidationError("LengthMismatch" | "NonFiniteInput").
double grpo_surrogate(std::span<const double> logp_new, std::span<const double> logp_old,
                      std::span<const double> advantages, double epsilon = kDefaultEpsilon);

}  // namespace tinr
