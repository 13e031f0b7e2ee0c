#include "tinr/driver.hpp"

#include "tinr/prompt.hpp"
#include "tinr/tokenizer.hpp"

#include <httplib.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <istream>
#include <ostream>

namespace tinr {

namespace {

Error protocol_error(const std::string& why) { return Error("PolicyProtocolError", why); }

// Tool output must not open or close blocks, nor read as a documentation block.
std::string safe_observation(const std::string& text) {
    std::string out = escape_block_text(text);
    const auto first = out.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && out.compare(first, 4, "doc:") == 0) out.insert(first, "> ");
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Wire messages

Json PolicyRequest::to_json() const {
    return Json{{"session_id", session_id},
                {"prompt_text", prompt_text},
                {"stop_tags", stop_tags},
                {"want_logprobs", want_logprobs}};
}

PolicyRequest PolicyRequest::from_json(const Json& json) {
    try {
        PolicyRequest r;
        r.session_id = json.at("session_id").get<std::string>();
        r.prompt_text = json.at("prompt_text").get<std::string>();
        r.stop_tags = json.value("stop_tags", std::vector<std::string>{});
        r.want_logprobs = json.value("want_logprobs", false);
        return r;
    } catch (const Json::exception& e) {
        throw ValidationError("MalformedPolicyMessage", e.what());
    }
}

std::string_view to_string(FinishReason reason) {
    switch (reason) {
        case FinishReason::StopTag: return "stop_tag";
        case FinishReason::Length: return "length";
        case FinishReason::End: return "end";
    }
    return "end";
}

FinishReason finish_reason_from_string(std::string_view name) {
    if (name == "stop_tag") return FinishReason::StopTag;
    if (name == "length") return FinishReason::Length;
    if (name == "end") return FinishReason::End;
    throw ValidationError("MalformedPolicyMessage", "unknown finish_reason '" + std::string(name) + "'");
}

Json PolicyResponse::to_json() const {
    Json out = {{"text", text}, {"finish_reason", std::string(to_string(finish_reason))}};
    out["logprobs"] = logprobs ? Json(*logprobs) : Json(nullptr);
    return out;
}

PolicyResponse PolicyResponse::from_json(const Json& json) {
    try {
        PolicyResponse r;
        r.text = json.at("text").get<std::string>();
        r.finish_reason = finish_reason_from_string(json.value("finish_reason", std::string("end")));
        if (json.contains("logprobs") && !json.at("logprobs").is_null()) {
            r.logprobs = json.at("logprobs").get<std::vector<double>>();
        }
        return r;
    } catch (const Json::exception& e) {
        throw ValidationError("MalformedPolicyMessage", e.what());
    }
}

void enforce_stop(PolicyResponse& response, const std::vector<std::string>& stop_tags) {
    std::size_t cut = std::string::npos;
    for (const auto& tag : stop_tags) {
        if (tag.empty()) continue;
        const auto pos = response.text.find(tag);
        if (pos != std::string::npos) cut = std::min(cut, pos + tag.size());
    }
    if (cut != std::string::npos) {
        response.text.resize(cut);
        response.finish_reason = FinishReason::StopTag;
    }
}

// ---------------------------------------------------------------------------
// Policies

ScriptedPolicy::ScriptedPolicy(std::vector<std::string> script, std::size_t vocab_size)
    : script_(std::move(script)), vocab_size_(vocab_size) {
    if (vocab_size_ < 1) throw ValidationError("InvalidArgument", "vocabulary size must be positive");
}

PolicyResponse ScriptedPolicy::generate(const PolicyRequest& request) {
    requests_.push_back(request);
    if (next_ >= script_.size()) throw Error("ScriptExhausted", "scripted policy has no response left");
    PolicyResponse response;
    response.text = script_[next_++];
    response.finish_reason = FinishReason::End;
    enforce_stop(response, request.stop_tags);
    if (request.want_logprobs) {
        const auto n = reference_tokenize(response.text).size();
        response.logprobs = std::vector<double>(n, -std::log(static_cast<double>(vocab_size_)));
    }
    return response;
}

PolicyResponse StreamPolicy::generate(const PolicyRequest& request) {
    out_ << compact_dump(request.to_json()) << '\n';
    out_.flush();
    if (!out_) throw protocol_error("policy stream is not writable");
    std::string line;
    if (!std::getline(in_, line)) throw protocol_error("policy stream closed");
    try {
        return PolicyResponse::from_json(Json::parse(line));
    } catch (const Json::exception& e) {
        throw protocol_error(std::string("malformed policy response: ") + e.what());
    } catch (const ValidationError& e) {
        throw protocol_error(e.what());
    }
}

HttpPolicy::HttpPolicy(std::string host, int port, std::string path)
    : host_(std::move(host)), port_(port), path_(std::move(path)) {}

PolicyResponse HttpPolicy::generate(const PolicyRequest& request) {
    httplib::Client client(host_, port_);
    client.set_read_timeout(600, 0);
    auto res = client.Post(path_, compact_dump(request.to_json()), "application/json");
    if (!res) throw protocol_error("policy endpoint unreachable: " + httplib::to_string(res.error()));
    if (res->status != 200) throw protocol_error("policy endpoint returned HTTP " + std::to_string(res->status));
    try {
        return PolicyResponse::from_json(Json::parse(res->body));
    } catch (const Json::exception& e) {
        throw protocol_error(std::string("malformed policy response: ") + e.what());
    } catch (const ValidationError& e) {
        throw protocol_error(e.what());
    }
}

// ---------------------------------------------------------------------------
// Executors

CannedExecutor::CannedExecutor(const DatasetRecord& record) {
    for (const auto& turn : record.turns) {
        for (std::size_t s = 0; s < turn.gt_steps.size(); ++s) {
            for (std::size_t c = 0; c < turn.gt_steps[s].size(); ++c) {
                if (s < turn.observations.size() && c < turn.observations[s].size()) {
                    recorded_.emplace_back(turn.gt_steps[s][c], turn.observations[s][c]);
                }
            }
        }
    }
}

std::string CannedExecutor::execute(const ToolCall& call, const ToolDoc*) {
    for (const auto& [recorded, observation] : recorded_) {
        if (recorded.token == call.token && values_equal(recorded.parameters, call.parameters)) return observation;
    }
    return std::string(kUnknownCallObservation);
}

HttpExecutor::HttpExecutor(std::string host, int port, std::string path)
    : host_(std::move(host)), port_(port), path_(std::move(path)) {}

std::string HttpExecutor::execute(const ToolCall& call, const ToolDoc* doc) {
    httplib::Client client(host_, port_);
    const Json body = {{"token", call.token}, {"name", doc ? doc->name : std::string{}}, {"parameters", call.parameters}};
    auto res = client.Post(path_, compact_dump(body), "application/json");
    if (!res) return "tool error: backend unreachable";
    if (res->status != 200) return "tool error: backend returned HTTP " + std::to_string(res->status);
    try {
        const Json reply = Json::parse(res->body);
        if (reply.is_object() && reply.contains("observation")) {
            const auto& obs = reply.at("observation");
            return obs.is_string() ? obs.get<std::string>() : compact_dump(obs);
        }
    } catch (const Json::exception&) {
    }
    return res->body;
}

// ---------------------------------------------------------------------------
// Prompts

namespace {

std::string render_history(const Session& session) {
    std::string out;
    const auto& turns = session.trajectory_so_far.turns;
    for (std::size_t i = 0; i < turns.size(); ++i) {
        Turn turn = turns[i];
        if (i + 1 < turns.size()) {
            std::erase_if(turn.segments, [](const Segment& s) { return std::holds_alternative<ToolDocs>(s); });
        }
        if (i > 0) out += "\n";
        out += serialize_turn(turn, true);
    }
    return out;
}

}  // namespace

std::string prompt_render(const Session& session) {
    return std::string(kSystemPrompt) + "\n\n" + render_history(session);
}

std::string tir_prompt_render(const Session& session) {
    std::string out(kSystemPrompt);
    out += "\n\nAvailable tools:\n";
    if (session.registry) {
        const auto& tools = session.registry->tools();
        for (std::size_t i = 0; i < tools.size(); ++i) {
            out += std::to_string(i + 1) + ". " + session.registry->token(i).surface + " " + tools[i].canonical() + "\n";
        }
    }
    return out + "\n" + render_history(session);
}

// ---------------------------------------------------------------------------
// Turn loop

TurnDriver::TurnDriver(Session& session, std::string user_text) : session_(session) {
    if (!session_.registry) throw ValidationError("InvalidSession", "session has no registry");
    if (session_.budget.max_steps == 0 || session_.budget.max_chars == 0) {
        throw ValidationError("InvalidSession", "budgets must be positive");
    }
    Turn turn{std::move(user_text), {}};
    try {
        if (parse(serialize_turn(turn)).turns != std::vector<Turn>{turn}) throw ParseError(0, "user text changes on re-parse");
    } catch (const ParseError& e) {
        throw ValidationError("MalformedUserText", std::string("user text is not a valid <user> payload: ") + e.reason());
    }
    session_.trajectory_so_far.turns.push_back(std::move(turn));
    session_.step = 0;
    check_chars();
}

PolicyRequest TurnDriver::next_request() const {
    PolicyRequest request;
    request.session_id = session_.id;
    request.prompt_text = prompt_render(session_);
    request.want_logprobs = want_logprobs_;
    if (phase_ == Phase::Call) {
        request.stop_tags = {"</tool_call>"};
    } else {
        request.stop_tags = {"</tool_token>", "</tool_call>", "</response>"};
    }
    return request;
}

void TurnDriver::check_chars() const {
    if (serialize(session_.trajectory_so_far).size() > session_.budget.max_chars) {
        throw Error("CharBudgetExceeded", "session " + session_.id + " exceeded " +
                                              std::to_string(session_.budget.max_chars) + " characters");
    }
}

void TurnDriver::dispatch(const std::vector<ToolCall>& calls, Executor& executor) {
    std::string observation;
    for (std::size_t i = 0; i < calls.size(); ++i) {
        const auto hit = session_.registry->resolve(calls[i].token);
        if (i > 0) observation += "\n";
        observation += executor.execute(calls[i], hit ? hit->doc : nullptr);
    }
    session_.trajectory_so_far.turns.back().segments.push_back(Observation{safe_observation(observation)});
    ++session_.step;
    check_chars();
}

void TurnDriver::feed(PolicyResponse response, Executor& executor) {
    if (phase_ == Phase::Done) throw protocol_error("turn is already complete");
    enforce_stop(response, next_request().stop_tags);

    Turn& current = session_.trajectory_so_far.turns.back();
    const std::string combined = serialize_turn(current, true) + "\n" + response.text;
    Trajectory parsed;
    try {
        parsed = parse(combined);
    } catch (const ParseError& e) {
        throw protocol_error(std::string("unparseable policy output: ") + e.reason());
    }
    if (parsed.turns.size() != 1) throw protocol_error("policy output opened a new <user> turn");
    current = std::move(parsed.turns.front());
    check_chars();

    const TurnState state = turn_state(current);
    auto begin_step = [this] {
        if (session_.step >= session_.budget.max_steps) {
            throw Error("StepBudgetExceeded", "session " + session_.id + " exceeded " +
                                                  std::to_string(session_.budget.max_steps) + " tool steps");
        }
    };
    auto last_calls = [&current]() -> const std::vector<ToolCall>& {
        return std::get<ToolCalls>(current.segments.back()).calls;
    };

    if (phase_ == Phase::Identify) {
        if (state == TurnState::Responded) {
            phase_ = Phase::Done;
        } else if (state == TurnState::Tokens) {
            begin_step();
            ToolDocs docs;
            for (const auto& surface : std::get<ToolTokens>(current.segments.back()).surfaces) {
                DocEntry entry{surface, std::nullopt, {}};
                if (auto hit = session_.registry->resolve(surface)) {
                    entry.doc = *hit->doc;
                } else {
                    entry.error = std::string(kUnregisteredTokenNotice);
                }
                docs.entries.push_back(std::move(entry));
            }
            current.segments.push_back(std::move(docs));
            check_chars();
            phase_ = Phase::Call;
        } else if (state == TurnState::Called) {
            begin_step();
            dispatch(last_calls(), executor);
        } else {
            throw protocol_error("policy stopped without identifying tools, calling them or responding");
        }
        return;
    }

    if (state != TurnState::Called) throw protocol_error("policy did not emit a <tool_call> block after documentation");
    dispatch(last_calls(), executor);
    phase_ = Phase::Identify;
}

Trajectory run_turn(Session& session, const std::string& user_text, Policy& policy, Executor& executor) {
    TurnDriver driver(session, user_text);
    while (!driver.done()) {
        driver.feed(policy.generate(driver.next_request()), executor);
    }
    return Trajectory{{driver.turn()}};
}

std::vector<std::string> oracle_script(const DatasetRecord& record) {
    std::vector<std::string> script;
    for (const auto& turn : record.turns) {
        for (std::size_t s = 0; s < turn.gt_steps.size(); ++s) {
            const auto& step = turn.gt_steps[s];
            if (step.empty()) continue;
            std::vector<std::string> surfaces;
            for (const auto& call : step) {
                if (std::find(surfaces.begin(), surfaces.end(), call.token) == surfaces.end()) surfaces.push_back(call.token);
            }
            std::string identify = "<think>step " + std::to_string(s + 1) + "</think>\n<tool_token>\n";
            for (const auto& surface : surfaces) identify += surface + "\n";
            script.push_back(identify + "</tool_token>");
            script.push_back(render_call_block(step));
        }
        script.push_back("<response>done</response>");
    }
    return script;
}

Trajectory run_record(Session& session, const DatasetRecord& record, Policy& policy, Executor& executor) {
    for (std::size_t t = 0; t < record.turns.size(); ++t) {
        const auto& user = record.turns[t].user_text;
        run_turn(session, t == 0 && user.empty() ? record.instruction : user, policy, executor);
    }
    return session.trajectory_so_far;
}

}  // namespace tinr
