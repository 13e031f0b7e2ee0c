#pragma once

// Trajectory text format.
//
// A trajectory is a sequence of tagged blocks. Recognized tags:
//   <user> <think> <tool_token> <tool_call> <obs> <response>
// Each <user> block opens a turn; blocks before the first <user> form an
// implicit turn with empty user text. Within a turn segments follow
//
//   start        -> Think | Response
//   Think        -> ToolTokens | ToolCalls | Response
//   ToolTokens   -> ToolDocs | Think | ToolCalls
//   ToolDocs     -> Think | ToolCalls
//   Think (after tokens/docs) -> ToolCalls
//   ToolCalls    -> Observation
//   Observation  -> Think | Response
//
// parse() accepts any path through this table; check_format() additionally
// demands that every turn be complete (end in ToolCalls or Response).
//
// Block payloads:
//   <tool_token>  one surface per non-blank line (a line made only of
//                 <<...>> tokens is split into them)
//   <tool_call>   one JSON object per non-blank line with exactly the keys
//                 "token" (non-empty string) and "parameters" (object)
//   <obs>         tool output; an <obs> whose first non-blank line is
//                 "doc:" carries injected documentation, one JSON line per
//                 token: {"token":..,"doc":{..}} or {"token":..,"error":".."}
// A '<' directly preceded by '<' never starts a tag, so <<name>> token
// surfaces are inert in every payload.
// Inside a block, any recognized tag other than its own closing tag is an
// error. Outside blocks, whitespace is ignored, unknown tags are errors and
// other text is skipped (check_format rejects skipped text holding '<' or '>').

#include "tinr/error.hpp"
#include "tinr/json_value.hpp"
#include "tinr/registry.hpp"

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace tinr {

struct ToolCall {
    std::string token;
    Json parameters = Json::object();

    bool operator==(const ToolCall&) const = default;
};

// One entry of an injected documentation block.
struct DocEntry {
    std::string token;
    std::optional<ToolDoc> doc;  // empty for unregistered tokens
    std::string error;           // notice text when doc is empty

    bool operator==(const DocEntry&) const = default;
};

struct Think {
    std::string text;
    bool operator==(const Think&) const = default;
};
struct ToolTokens {
    std::vector<std::string> surfaces;
    bool operator==(const ToolTokens&) const = default;
};
struct ToolDocs {
    std::vector<DocEntry> entries;
    bool operator==(const ToolDocs&) const = default;
};
struct ToolCalls {
    std::vector<ToolCall> calls;
    bool operator==(const ToolCalls&) const = default;
};
struct Observation {
    std::string text;
    bool operator==(const Observation&) const = default;
};
struct Response {
    std::string text;
    bool operator==(const Response&) const = default;
};

using Segment = std::variant<Think, ToolTokens, ToolDocs, ToolCalls, Observation, Response>;

enum class SegmentKind { Think, ToolTokenBlock, ToolDocBlock, ToolCallBlock, Observation, Response };

inline SegmentKind kind_of(const Segment& s) { return static_cast<SegmentKind>(s.index()); }
std::string_view to_string(SegmentKind kind);

struct Turn {
    std::string user_text;
    std::vector<Segment> segments;

    bool operator==(const Turn&) const = default;
};

struct Trajectory {
    std::vector<Turn> turns;

    bool operator==(const Trajectory&) const = default;
};

// Position within the per-turn grammar after consuming a segment sequence.
enum class TurnState { Start, Thought, Tokens, Docs, PlanningCall, Called, Observed, Responded };

// Next state, or nullopt when `kind` may not follow `state`.
std::optional<TurnState> advance(TurnState state, SegmentKind kind);
TurnState turn_state(const Turn& turn);
bool is_complete(TurnState state);

struct ParseDiagnostics {
    bool stray_text = false;      // non-whitespace text outside any block
    bool stray_tag_text = false;  // such text containing '<' or '>'
};

// Throws ParseError (offset + reason); never aborts otherwise.
Trajectory parse(std::string_view text, ParseDiagnostics* diagnostics = nullptr);

// Canonical rendering; parse(serialize(t)) == t for every parser-produced t.
std::string serialize(const Trajectory& trajectory);
std::string serialize_turn(const Turn& turn, bool emit_empty_user = true);
std::string serialize_segment(const Segment& segment);
std::string render_call_line(const ToolCall& call);
std::string render_call_block(const std::vector<ToolCall>& calls);

// Makes free text safe as a block payload: the '<' of every recognized tag,
// and a trailing '<', become "&lt;".
std::string escape_block_text(std::string_view text);

// Parse succeeds, no tag text outside blocks, at least one turn, and every
// turn complete. The R_format predicate.
bool check_format(std::string_view text);

// Parse succeeds and no tag text outside blocks; turns may be incomplete.
bool check_prefix(std::string_view text);

// A tool step: the tokens identified and the calls issued between two observations.
struct Step {
    std::size_t turn = 0;
    std::vector<std::string> tokens;
    std::vector<ToolCall> calls;
    bool has_token_block = false;
    bool has_call_block = false;
};

std::vector<Step> extract_steps(const Trajectory& trajectory);
std::vector<std::vector<ToolCall>> extract_calls(const Trajectory& trajectory);

// Parses one <tool_call> line. Throws ParseError with offsets relative to `line`.
ToolCall parse_call_line(std::string_view line);

}  // namespace tinr
