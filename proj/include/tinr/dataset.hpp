#pragma once

#include "tinr/registry.hpp"
#include "tinr/rewards.hpp"
#include "tinr/trajectory.hpp"

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace tinr {

enum class Split { Train, TestSeen, TestUnseen, Ood };

std::string_view to_string(Split split);
Split split_from_string(std::string_view name);

struct RecordTurn {
    std::string user_text;
    StepCalls gt_steps;
    // Recorded tool outputs per step, one string per ground-truth call.
    std::vector<std::vector<std::string>> observations;
};

// One dataset line:
//   {"id", "split", "instruction"?, "turns": [{"user", "steps": [[{"token"|"name", "parameters"}]],
//    "observations"?: [[string]]}]}
struct DatasetRecord {
    std::string id;
    std::string instruction;  // q; defaults to the first turn's user text
    std::vector<RecordTurn> turns;
    Split split = Split::Train;

    StepCalls all_steps() const;
    std::set<std::string> gt_tokens() const;
    bool in_domain() const { return split != Split::Ood; }
};

inline constexpr int kDatasetSchemaVersion = 1;

// Ground-truth references may be raw tool names or token surfaces; both are
// normalized to surfaces. Unresolvable references in in-domain records throw
// ValidationError("UnregisteredToolInDataset"); schema violations throw
// ValidationError("MalformedDataset").
DatasetRecord record_from_json(const Json& json, const ToolRegistry& registry);
Json record_to_json(const DatasetRecord& record);

std::vector<DatasetRecord> parse_dataset(const std::string& jsonl, const ToolRegistry& registry);
std::vector<DatasetRecord> load_dataset(const std::filesystem::path& path, const ToolRegistry& registry);

const DatasetRecord* find_record(const std::vector<DatasetRecord>& records, std::string_view id);

}  // namespace tinr
