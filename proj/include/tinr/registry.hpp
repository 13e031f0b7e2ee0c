#pragma once

#include "tinr/error.hpp"
#include "tinr/json_value.hpp"

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace tinr {

enum class ValueType { String, Integer, Number, Boolean, Array, Object };

std::string_view to_string(ValueType type);
ValueType value_type_from_string(std::string_view name);
bool json_matches(const Json& value, ValueType type);

struct ParamSpec {
    std::string name;
    ValueType value_type = ValueType::String;
    bool required = false;
    std::string description;
    std::optional<Json> default_value;

    bool operator==(const ParamSpec&) const = default;
};

// Tool documentation D(t). Parameters are kept sorted by name.
struct ToolDoc {
    std::string name;
    std::string description;
    std::vector<ParamSpec> parameters;

    // Checks invariants and sorts parameters. Throws ValidationError("InvalidToolDoc").
    void normalize();

    Json to_json() const;
    // Accepts either a parameter list or a JSON-schema style
    // {"properties": {...}, "required": [...]} object.
    static ToolDoc from_json(const Json& json);

    // Deterministic compact JSON with sorted keys and parameters.
    std::string canonical() const;

    // Plain text used for lexical similarity and ranking.
    std::string search_text() const;

    bool operator==(const ToolDoc&) const = default;
};

struct ToolToken {
    std::string surface;
    std::size_t tool_index = 0;

    bool operator==(const ToolToken&) const = default;
};

enum class IndexStrategy { Atomic, Semantic, Numeric, Hierarchical };

std::string_view to_string(IndexStrategy strategy);
IndexStrategy strategy_from_string(std::string_view name);

inline constexpr std::size_t kDefaultBranching = 10;
inline constexpr int kRegistryFormatVersion = 1;

// Lowercase, camelCase humps split, non-alphanumerics to '_', runs collapsed.
std::string sanitize_tool_name(std::string_view name);

// Dash-joined tree paths from recursive k-way clustering of documentation
// by term-frequency cosine similarity. Throws ValidationError("InvalidBranching").
std::vector<std::string> hierarchical_paths(const std::vector<ToolDoc>& tools, std::size_t branching);

struct ResolvedTool {
    const ToolDoc* doc;
    const ToolToken* token;
};

// The toolset and its identifier tokens. Immutable after build; safe for
// concurrent readers.
class ToolRegistry {
public:
    // Throws ValidationError("EmptyToolset" | "DuplicateToolDoc" | "InvalidToolDoc" | "InvalidBranching").
    static ToolRegistry build(std::vector<ToolDoc> tools, IndexStrategy strategy,
                              std::size_t branching = kDefaultBranching);

    // Throws ValidationError("MalformedRegistryFile").
    static ToolRegistry load(std::string_view bytes);
    std::string serialize() const;

    std::optional<ResolvedTool> resolve(std::string_view surface) const;
    std::optional<std::size_t> index_of_name(std::string_view name) const;

    // Surface for a ground-truth reference that is either a surface or a raw tool name.
    std::optional<std::string> normalize_reference(std::string_view name_or_surface) const;

    std::size_t size() const { return tools_.size(); }
    const std::vector<ToolDoc>& tools() const { return tools_; }
    const std::vector<ToolToken>& tokens() const { return tokens_; }
    const ToolDoc& tool(std::size_t index) const { return tools_.at(index); }
    const ToolToken& token(std::size_t index) const { return tokens_.at(index); }
    IndexStrategy strategy() const { return strategy_; }
    std::size_t branching() const { return branching_; }

    bool operator==(const ToolRegistry& other) const {
        return strategy_ == other.strategy_ && branching_ == other.branching_ && tools_ == other.tools_ &&
               tokens_ == other.tokens_;
    }

private:
    ToolRegistry(std::vector<ToolDoc> tools, std::vector<ToolToken> tokens, IndexStrategy strategy,
                 std::size_t branching);

    std::vector<ToolDoc> tools_;
    std::vector<ToolToken> tokens_;  // tokens_[i].tool_index == i
    IndexStrategy strategy_;
    std::size_t branching_;
    std::unordered_map<std::string, std::size_t> by_surface_;
    std::unordered_map<std::string, std::size_t> by_name_;  // first tool with that name
};

}  // namespace tinr
