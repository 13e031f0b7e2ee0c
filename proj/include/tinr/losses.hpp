#pragma once

#include "tinr/dataset.hpp"
#include "tinr/registry.hpp"

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace tinr {

enum class Phase { Memorization, Recall, Usage, Sft };

std::string_view to_string(Phase phase);
Phase phase_from_string(std::string_view name);

// A conditional sequence to be priced by the policy: -log P(target | context).
struct TrainingExample {
    std::string id;
    Phase phase = Phase::Usage;
    std::string context_text;
    std::string target_text;
    double weight = 1.0;

    Json to_json() const;
    static TrainingExample from_json(const Json& json);
};

// Boundary rendering between context and target. Changing any of these
// changes the training data; bump kExamplePromptVersion with them.
inline constexpr int kExamplePromptVersion = 1;
inline constexpr std::string_view kMemorizationInstruction = "Identify the tool token for this documentation:";
inline constexpr std::string_view kRecallInstruction = "Write the documentation for this tool token:";

inline constexpr double kDefaultAlpha = 1.0;
inline constexpr double kDefaultBeta = 1.0;

// Per tool one Memorization (doc -> token) and one Recall (token -> doc)
// example, then one Usage example (q -> call block) per record.
// Throws ValidationError("UnregisteredToolInDataset" | "MalformedDataset").
std::vector<TrainingExample> build_phase1_examples(const ToolRegistry& registry,
                                                   const std::vector<DatasetRecord>& dataset);

// A formatted trajectory awaiting SFT: the output of the data formatting step.
struct SftRecord {
    std::string id;
    std::string instruction;
    std::string trajectory_text;

    static SftRecord from_json(const Json& json);
    Json to_json() const;
};

// context = system prompt + <user> turn, target = the assistant trajectory.
// Throws ValidationError("MalformedTrajectoryInDataset") when a trajectory
// fails the format check or calls/identifies an unregistered token.
std::vector<TrainingExample> build_sft_examples(const std::vector<SftRecord>& records, const ToolRegistry& registry);

struct LossReport {
    double memorization = 0.0;
    double recall = 0.0;
    double usage = 0.0;
    double phase1_total = 0.0;  // memorization + alpha * recall + beta * usage
    double sft = 0.0;
    double alpha = kDefaultAlpha;
    double beta = kDefaultBeta;
    std::map<Phase, std::size_t> token_counts;

    // Loss per target token for one phase; derived view, 0 when no tokens.
    double per_token_mean(Phase phase) const;
    Json to_json() const;
};

// Sums -weight * Σ logprob per phase. `logprobs[i]` belongs to examples[i].
// Throws ValidationError("LengthMismatch" | "PositiveLogProb" | "NonFiniteInput").
LossReport aggregate_losses(const std::vector<TrainingExample>& examples,
                            const std::vector<std::vector<double>>& logprobs, double alpha = kDefaultAlpha,
                            double beta = kDefaultBeta);

// Wire form: [{"example_id", "logprobs": [...]}]; only the listed examples are priced.
// Throws ValidationError("UnknownExample") for ids not in `examples`.
LossReport aggregate_losses(const std::vector<TrainingExample>& examples, const Json& logprob_messages,
                            double alpha = kDefaultAlpha, double beta = kDefaultBeta);

}  // namespace tinr
