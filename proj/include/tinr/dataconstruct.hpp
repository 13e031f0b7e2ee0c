#pragma once

#include "tinr/dataset.hpp"
#include "tinr/registry.hpp"
#include "tinr/text_index.hpp"
#include "tinr/trajectory.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace tinr {

using RankedTools = std::vector<std::pair<std::size_t, double>>;  // (tool_index, score), best first

// Ranks the whole toolset for a query. Implementations must be deterministic.
class Retriever {
public:
    virtual ~Retriever() = default;
    virtual RankedTools rank(std::string_view query) const = 0;
};

// BM25 (k1 = 1.2, b = 0.75) over each tool's documentation text; ties by tool index.
class Bm25Retriever final : public Retriever {
public:
    explicit Bm25Retriever(const ToolRegistry& registry, Bm25Params params = {});
    RankedTools rank(std::string_view query) const override;

private:
    Bm25Index index_;
};

RankedTools lexical_rank(std::string_view query, const ToolRegistry& registry);

enum class Provenance { GroundTruth, Retrieved, Random };

std::string_view to_string(Provenance p);

struct CandidateSet {
    std::string record_id;
    std::vector<std::size_t> candidates;
    std::vector<Provenance> provenance;

    // {"record_id", "candidates": [surface...], "provenance": [...]}
    Json to_json(const ToolRegistry& registry) const;
};

inline constexpr std::size_t kDefaultCandidateCount = 10;
inline constexpr std::size_t kDefaultRetrievedCount = 5;

// Ground truth first, then the top `retrieved_count` non-ground-truth tools
// by the retriever, then a seeded uniform fill to `k`. The random stream is
// derived from (seed, record id) only. `retrieved_count` is capped at
// k - |ground truth|.
// Throws ValidationError("TooManyGroundTruthTools" | "InsufficientTools" | "UnregisteredToolInDataset").
CandidateSet sample_candidates(const DatasetRecord& record, const ToolRegistry& registry, std::size_t k,
                               std::size_t retrieved_count, std::uint64_t seed, const Retriever& retriever);
CandidateSet sample_candidates(const DatasetRecord& record, const ToolRegistry& registry, std::size_t k,
                               std::size_t retrieved_count, std::uint64_t seed);

// Same multiset of tokens and, call for call, structurally equal parameters.
bool calls_exact_match(const std::vector<ToolCall>& pred, const std::vector<ToolCall>& gt);

struct Rejection {
    std::size_t candidate;
    std::string reason;
};

struct FilterResult {
    std::vector<std::size_t> accepted_indices;
    std::vector<Trajectory> accepted;
    std::vector<Rejection> rejections;
};

// Keeps the candidates that pass check_format and whose every step matches
// the record's ground truth exactly. Call tokens may be raw tool names or
// surfaces.
FilterResult reject_filter(const std::vector<std::string>& candidate_texts, const DatasetRecord& record,
                           const ToolRegistry& registry);

// Replaces registered tool names with their token surfaces inside Think
// text (word boundaries, longest name first, existing <<...>> spans left
// alone) and in call/token blocks. Idempotent.
// Throws ValidationError("UnknownToolNameInCall").
Trajectory format_trajectory(const Trajectory& raw, const ToolRegistry& registry);

// Think-text substitution on its own.
std::string substitute_tool_names(std::string_view text, const ToolRegistry& registry);

}  // namespace tinr
