#include "tinr/rewards.hpp"

#include <cmath>
#include <numeric>

namespace tinr {

std::set<std::string> token_set(const std::vector<ToolCall>& calls) {
    std::set<std::string> out;
    for (const auto& c : calls) out.insert(c.token);
    return out;
}

std::set<ParamPair> param_set(const ToolCall& call) {
    std::set<ParamPair> out;
    for (const auto& [name, value] : call.parameters.items()) out.emplace(name, canonical_dump(value));
    return out;
}

std::vector<std::optional<std::size_t>> match_calls(const std::vector<ToolCall>& pred,
                                                    const std::vector<ToolCall>& gt) {
    std::vector<std::optional<std::size_t>> matches(gt.size());
    std::vector<bool> used(pred.size(), false);
    for (std::size_t i = 0; i < gt.size(); ++i) {
        for (std::size_t j = 0; j < pred.size(); ++j) {
            if (!used[j] && pred[j].token == gt[i].token) {
                used[j] = true;
                matches[i] = j;
                break;
            }
        }
    }
    return matches;
}

double reward_tool(const std::vector<ToolCall>& pred, const std::vector<ToolCall>& gt) {
    return jaccard(token_set(pred), token_set(gt));
}

double reward_param(const std::vector<ToolCall>& pred, const std::vector<ToolCall>& gt) {
    if (gt.empty()) return pred.empty() ? 1.0 : 0.0;
    const auto matches = match_calls(pred, gt);
    double sum = 0.0;
    for (std::size_t i = 0; i < gt.size(); ++i) {
        if (matches[i]) sum += jaccard(param_set(gt[i]), param_set(pred[*matches[i]]));
    }
    return sum / static_cast<double>(gt.size());
}

std::string_view to_string(ScoringMode mode) { return mode == ScoringMode::FinalStep ? "final" : "per_step"; }

ScoringMode scoring_mode_from_string(std::string_view name) {
    if (name == "final") return ScoringMode::FinalStep;
    if (name == "per_step") return ScoringMode::PerStep;
    throw ValidationError("InvalidScoringMode", "unknown scoring mode '" + std::string(name) + "'");
}

RewardBreakdown score(std::string_view text, const StepCalls& gt_steps, const ToolRegistry& registry,
                      ScoringMode mode) {
    RewardBreakdown out;
    out.format = check_format(text) ? 1.0 : 0.0;
    Trajectory trajectory;
    try {
        trajectory = parse(text);
    } catch (const ParseError& e) {
        out.diagnostics.push_back(e.what());
        out.total = out.format;
        return out;
    }
    if (out.format == 0.0) out.diagnostics.push_back("format check failed");

    const auto pred_steps = extract_calls(trajectory);
    for (const auto& step : pred_steps) {
        for (const auto& call : step) {
            if (!registry.resolve(call.token)) out.diagnostics.push_back("unregistered tool token '" + call.token + "'");
        }
    }

    static const std::vector<ToolCall> kNone;
    if (mode == ScoringMode::FinalStep) {
        const auto& pred = pred_steps.empty() ? kNone : pred_steps.back();
        const auto& gt = gt_steps.empty() ? kNone : gt_steps.back();
        out.tool = reward_tool(pred, gt);
        out.param = reward_param(pred, gt);
    } else {
        const std::size_t n = std::max(pred_steps.size(), gt_steps.size());
        if (n == 0) {
            out.tool = 1.0;
            out.param = 1.0;
        } else {
            double tool = 0.0;
            double param = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const auto& pred = i < pred_steps.size() ? pred_steps[i] : kNone;
                const auto& gt = i < gt_steps.size() ? gt_steps[i] : kNone;
                tool += reward_tool(pred, gt);
                param += reward_param(pred, gt);
            }
            out.tool = tool / static_cast<double>(n);
            out.param = param / static_cast<double>(n);
        }
    }
    out.total = out.format + out.tool + out.param;
    return out;
}

GroupAdvantages group_advantages(std::span<const double> rewards, double epsilon_clip) {
    if (rewards.size() < 2) throw ValidationError("GroupTooSmall", "a GRPO group needs at least 2 rewards");
    for (double r : rewards) {
        if (!std::isfinite(r)) throw ValidationError("NonFiniteInput", "rewards must be finite");
    }
    GroupAdvantages out;
    out.rewards.assign(rewards.begin(), rewards.end());
    out.epsilon_clip = epsilon_clip;
    const double n = static_cast<double>(rewards.size());
    const double mean = std::accumulate(rewards.begin(), rewards.end(), 0.0) / n;
    double sq = 0.0;
    for (double r : rewards) sq += (r - mean) * (r - mean);
    const double stddev = std::sqrt(sq / n);
    out.advantages.assign(rewards.size(), 0.0);
    if (stddev < kDegenerateStd) {
        out.degenerate = true;
        return out;
    }
    for (std::size_t i = 0; i < rewards.size(); ++i) out.advantages[i] = (rewards[i] - mean) / stddev;
    return out;
}

double grpo_surrogate(std::span<const double> logp_new, std::span<const double> logp_old,
                      std::span<const double> advantages, double epsilon) {
    if (logp_new.size() != logp_old.size() || logp_new.size() != advantages.size()) {
        throw ValidationError("LengthMismatch", "logp_new, logp_old and advantages must have equal length");
    }
    if (logp_new.empty()) throw ValidationError("LengthMismatch", "empty group");
    if (std::isnan(epsilon) || epsilon < 0.0) throw ValidationError("NonFiniteInput", "epsilon must be >= 0");
    double sum = 0.0;
    for (std::size_t i = 0; i < logp_new.size(); ++i) {
        if (!std::isfinite(logp_new[i]) || !std::isfinite(logp_old[i]) || !std::isfinite(advantages[i])) {
            throw ValidationError("NonFiniteInput", "log-probabilities and advantages must be finite");
        }
        const double ratio = std::exp(logp_new[i] - logp_old[i]);
        const double clipped = std::clamp(ratio, 1.0 - epsilon, 1.0 + epsilon);
        sum += std::min(ratio * advantages[i], clipped * advantages[i]);
    }
    return sum / static_cast<double>(logp_new.size());
}

Json RewardBreakdown::to_json() const {
    return Json{{"schema_version", 1}, {"format", format}, {"tool", tool},
                {"param", param},      {"total", total},   {"diagnostics", diagnostics}};
}

Json GroupAdvantages::to_json() const {
    return Json{{"schema_version", 1},
                {"rewards", rewards},
                {"advantages", advantages},
                {"epsilon_clip", epsilon_clip},
                {"degenerate", degenerate}};
}

}  // namespace tinr
