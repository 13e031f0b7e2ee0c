#pragma once

#include "tinr/dataset.hpp"
#include "tinr/registry.hpp"
#include "tinr/trajectory.hpp"

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace tinr {

struct IdentificationResult {
    int em = 0;
    double f1 = 0.0;
};

// Set equality and F1 of predicted vs ground-truth tool tokens. Both empty
// scores (1, 1); exactly one empty scores (0, 0).
IdentificationResult eval_identification(const std::set<std::string>& pred, const std::set<std::string>& gt);

struct CallingResult {
    int em = 0;
    int tool_acc = 0;
    int param_acc = 0;
};

// tool_acc: token sets equal. param_acc: every ground-truth call has a
// token-matched prediction with an equal parameter map, and any surplus
// prediction for a ground-truth token repeats one of that token's
// parameter maps. em: both, and the same number of calls.
CallingResult eval_calling(const std::vector<ToolCall>& pred, const std::vector<ToolCall>& gt);

enum class TurnScope { Final, PerStep };

std::string_view to_string(TurnScope scope);
TurnScope turn_scope_from_string(std::string_view name);

struct RecordDetail {
    std::string id;
    bool missing = false;
    double ident_em = 0.0;
    double ident_f1 = 0.0;
    double call_em = 0.0;
    double tool_acc = 0.0;
    double param_acc = 0.0;

    Json to_json() const;
};

// Aggregates are percentages in [0, 100].
struct EvalReport {
    double ident_em = 0.0;
    double ident_f1 = 0.0;
    double call_em = 0.0;
    double tool_acc = 0.0;
    double param_acc = 0.0;
    std::size_t n = 0;
    std::vector<RecordDetail> per_record;

    Json to_json() const;
    std::string to_table() const;
    std::string per_record_jsonl() const;
};

// Keyed by record id; nullopt marks an explicitly missing prediction.
using Predictions = std::map<std::string, std::optional<Trajectory>>;

// Records absent from `predictions` or marked missing score 0 everywhere.
// Throws ValidationError("UnknownRecordId") for prediction ids not in the dataset.
EvalReport evaluate_dataset(const Predictions& predictions, const std::vector<DatasetRecord>& dataset,
                            const ToolRegistry& registry, TurnScope scope = TurnScope::Final);

}  // namespace tinr
