#pragma once

#include "tinr/dataset.hpp"
#include "tinr/registry.hpp"
#include "tinr/trajectory.hpp"

#include <cstddef>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace tinr {

// ---------------------------------------------------------------------------
// Policy wire protocol. One JSON object per message, newline-delimited on a
// byte stream or as an HTTP POST body.

struct PolicyRequest {
    std::string session_id;
    std::string prompt_text;
    std::vector<std::string> stop_tags;
    bool want_logprobs = false;

    Json to_json() const;
    static PolicyRequest from_json(const Json& json);
};

enum class FinishReason { StopTag, Length, End };

std::string_view to_string(FinishReason reason);
FinishReason finish_reason_from_string(std::string_view name);

struct PolicyResponse {
    std::string text;
    FinishReason finish_reason = FinishReason::End;
    std::optional<std::vector<double>> logprobs;

    Json to_json() const;
    static PolicyResponse from_json(const Json& json);
};

// Cuts `response.text` right after the earliest stop tag it contains.
void enforce_stop(PolicyResponse& response, const std::vector<std::string>& stop_tags);

class Policy {
public:
    virtual ~Policy() = default;
    virtual PolicyResponse generate(const PolicyRequest& request) = 0;
};

// Replays canned responses in order. Logprobs, when requested, are uniform
// over a vocabulary of `vocab_size`: -ln V per reference token.
// Throws Error("ScriptExhausted") past the end of the script.
class ScriptedPolicy final : public Policy {
public:
    explicit ScriptedPolicy(std::vector<std::string> script, std::size_t vocab_size = 32000);

    PolicyResponse generate(const PolicyRequest& request) override;

    const std::vector<PolicyRequest>& requests() const { return requests_; }
    std::size_t remaining() const { return script_.size() - next_; }

private:
    std::vector<std::string> script_;
    std::size_t next_ = 0;
    std::size_t vocab_size_;
    std::vector<PolicyRequest> requests_;
};

// Newline-delimited JSON over a pair of streams (pipes, sockets).
class StreamPolicy final : public Policy {
public:
    StreamPolicy(std::istream& in, std::ostream& out) : in_(in), out_(out) {}
    PolicyResponse generate(const PolicyRequest& request) override;

private:
    std::istream& in_;
    std::ostream& out_;
};

// POSTs each request to http://host:port/path.
class HttpPolicy final : public Policy {
public:
    HttpPolicy(std::string host, int port, std::string path = "/generate");
    PolicyResponse generate(const PolicyRequest& request) override;

private:
    std::string host_;
    int port_;
    std::string path_;
};

// ---------------------------------------------------------------------------
// Tool execution.

inline constexpr std::string_view kUnknownCallObservation = "tool error: unknown call";

class Executor {
public:
    virtual ~Executor() = default;
    // `doc` is null for unregistered tokens.
    virtual std::string execute(const ToolCall& call, const ToolDoc* doc) = 0;
};

// Replays the observations recorded in a dataset record for calls equal to
// one of its ground-truth calls.
class CannedExecutor final : public Executor {
public:
    explicit CannedExecutor(const DatasetRecord& record);
    std::string execute(const ToolCall& call, const ToolDoc* doc) override;

private:
    std::vector<std::pair<ToolCall, std::string>> recorded_;
};

// Forwards {"token", "name", "parameters"} to a tool backend; the reply's
// "observation" field (or raw body) becomes the observation.
class HttpExecutor final : public Executor {
public:
    HttpExecutor(std::string host, int port, std::string path = "/call");
    std::string execute(const ToolCall& call, const ToolDoc* doc) override;

private:
    std::string host_;
    int port_;
    std::string path_;
};

// ---------------------------------------------------------------------------
// Sessions and the two-step loop.

struct Budget {
    std::size_t max_steps = 8;
    std::size_t max_chars = 32768;
};

struct Session {
    std::string id;
    std::shared_ptr<const ToolRegistry> registry;
    Trajectory trajectory_so_far;
    std::size_t step = 0;  // tool steps dispatched in the current turn
    Budget budget;
};

inline constexpr std::string_view kUnregisteredTokenNotice = "unregistered tool token";

// System prompt followed by the dialogue. Documentation blocks of earlier
// turns are dropped; only the current turn's injected documentation stays.
std::string prompt_render(const Session& session);

// Tool-integrated baseline rendering: the system prompt plus the
// documentation of every tool in the registry.
std::string tir_prompt_render(const Session& session);

// One turn of the two-step protocol as a resumable state machine, so the
// same logic serves in-process loops and the HTTP session endpoints.
//
//   identify: policy writes until </tool_token>, </tool_call> or </response>
//   calling:  after documentation injection, policy writes until </tool_call>
//
// Throws Error("PolicyProtocolError" | "StepBudgetExceeded" | "CharBudgetExceeded").
class TurnDriver {
public:
    TurnDriver(Session& session, std::string user_text);

    bool done() const { return phase_ == Phase::Done; }
    void set_want_logprobs(bool want) { want_logprobs_ = want; }
    PolicyRequest next_request() const;
    void feed(PolicyResponse response, Executor& executor);

    const Turn& turn() const { return session_.trajectory_so_far.turns.back(); }

private:
    enum class Phase { Identify, Call, Done };

    void check_chars() const;
    void dispatch(const std::vector<ToolCall>& calls, Executor& executor);

    Session& session_;
    Phase phase_ = Phase::Identify;
    bool want_logprobs_ = false;
};

// Runs a whole turn and returns it as a one-turn trajectory.
Trajectory run_turn(Session& session, const std::string& user_text, Policy& policy, Executor& executor);

// Policy responses that replay a record's ground truth through the loop: per
// step a token response and a call response, then a closing response per
// turn. Flattened across turns.
std::vector<std::string> oracle_script(const DatasetRecord& record);

// Runs every turn of `record` in one session.
Trajectory run_record(Session& session, const DatasetRecord& record, Policy& policy, Executor& executor);

}  // namespace tinr
