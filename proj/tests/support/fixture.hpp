#pragma once

#include "tinr/dataset.hpp"
#include "tinr/registry.hpp"

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace tinr::testing {

// 60 tools: six verbs crossed with ten nouns, camelCase names, one to three
// typed parameters each (the first always required).
std::vector<ToolDoc> fixture_tools();

// `n` tools named tool_<zero-padded index>_<noun> with short descriptions.
std::vector<ToolDoc> synthetic_tools(std::size_t n);

// Ground-truth call for tool `tool` with deterministic argument values.
ToolCall fixture_call(const ToolRegistry& registry, std::size_t tool, std::size_t salt);

// `count` single-turn, single-step records. Record i uses gt_per_record(i)
// distinct tools; every call has a recorded observation.
std::vector<DatasetRecord> fixture_records(const ToolRegistry& registry, std::size_t count,
                                           std::size_t (*gt_per_record)(std::size_t), std::uint64_t seed);

inline std::size_t one_to_three(std::size_t i) { return i % 3 + 1; }
inline std::size_t one_or_two(std::size_t i) { return i % 2 + 1; }

// Serialized trajectory that performs the record's ground truth.
std::string oracle_text(const DatasetRecord& record, const ToolRegistry& registry);

std::shared_ptr<const ToolRegistry> fixture_registry(IndexStrategy strategy = IndexStrategy::Atomic);

}  // namespace tinr::testing
