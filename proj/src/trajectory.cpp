#include "tinr/trajectory.hpp"

#include <array>
#include <cctype>
#include <set>

namespace tinr {

namespace {

enum class Tag { User, Think, ToolToken, ToolCall, Obs, Response };

constexpr std::array<std::string_view, 6> kTagNames = {"user", "think", "tool_token", "tool_call", "obs", "response"};

std::string_view name_of(Tag tag) { return kTagNames[static_cast<std::size_t>(tag)]; }

struct TagMatch {
    Tag tag;
    bool closing;
    std::size_t length;
};

// Recognized tag starting exactly at `pos`.
std::optional<TagMatch> match_known(std::string_view text, std::size_t pos) {
    if (pos >= text.size() || text[pos] != '<') return std::nullopt;
    if (pos > 0 && text[pos - 1] == '<') return std::nullopt;
    std::size_t p = pos + 1;
    const bool closing = p < text.size() && text[p] == '/';
    if (closing) ++p;
    for (std::size_t i = 0; i < kTagNames.size(); ++i) {
        const auto name = kTagNames[i];
        if (text.compare(p, name.size(), name) == 0 && p + name.size() < text.size() && text[p + name.size()] == '>') {
            return TagMatch{static_cast<Tag>(i), closing, p + name.size() + 1 - pos};
        }
    }
    return std::nullopt;
}

// Length of a syntactic tag `</?[A-Za-z][A-Za-z0-9_-]*>` at `pos`, or 0.
std::size_t match_any_tag(std::string_view text, std::size_t pos) {
    if (pos > 0 && text[pos - 1] == '<') return 0;
    std::size_t p = pos + 1;
    if (p < text.size() && text[p] == '/') ++p;
    if (p >= text.size() || !std::isalpha(static_cast<unsigned char>(text[p]))) return 0;
    while (p < text.size()) {
        const auto c = static_cast<unsigned char>(text[p]);
        if (std::isalnum(c) || c == '_' || c == '-') {
            ++p;
        } else {
            break;
        }
    }
    if (p < text.size() && text[p] == '>') return p + 1 - pos;
    return 0;
}

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }

std::string_view trim(std::string_view s) {
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return s;
}

struct Line {
    std::size_t offset;  // of the untrimmed line start
    std::string_view text;
};

std::vector<Line> split_lines(std::string_view body) {
    std::vector<Line> lines;
    std::size_t start = 0;
    while (start <= body.size()) {
        const auto end = body.find('\n', start);
        const auto stop = end == std::string_view::npos ? body.size() : end;
        lines.push_back({start, body.substr(start, stop - start)});
        if (end == std::string_view::npos) break;
        start = end + 1;
    }
    return lines;
}

Json parse_strict_object(std::string_view text, std::size_t base, const char* what) {
    std::vector<std::set<std::string>> keys;
    bool duplicate = false;
    auto callback = [&](int, Json::parse_event_t event, Json& parsed) {
        switch (event) {
            case Json::parse_event_t::object_start: keys.emplace_back(); break;
            case Json::parse_event_t::object_end:
                if (!keys.empty()) keys.pop_back();
                break;
            case Json::parse_event_t::key:
                if (!keys.empty() && !keys.back().insert(parsed.get<std::string>()).second) duplicate = true;
                break;
            default: break;
        }
        return true;
    };
    Json value;
    try {
        value = Json::parse(text.begin(), text.end(), callback);
    } catch (const Json::parse_error& e) {
        const std::size_t at = e.byte > 0 ? std::min<std::size_t>(e.byte - 1, text.size()) : 0;
        throw ParseError(base + at, std::string("malformed ") + what + ": invalid JSON");
    }
    if (duplicate) throw ParseError(base, std::string("malformed ") + what + ": duplicate object key");
    if (!value.is_object()) throw ParseError(base, std::string("malformed ") + what + ": not a JSON object");
    return value;
}

DocEntry parse_doc_line(std::string_view line, std::size_t base) {
    const Json value = parse_strict_object(line, base, "documentation line");
    auto bad = [base](const std::string& why) { return ParseError(base, "malformed documentation line: " + why); };
    if (value.size() != 2 || !value.contains("token")) throw bad("expected keys \"token\" and one of \"doc\"/\"error\"");
    if (!value.at("token").is_string() || value.at("token").get_ref<const std::string&>().empty()) {
        throw bad("\"token\" must be a non-empty string");
    }
    DocEntry entry;
    entry.token = value.at("token").get<std::string>();
    if (value.contains("doc")) {
        try {
            entry.doc = ToolDoc::from_json(value.at("doc"));
        } catch (const ValidationError& e) {
            throw bad(e.what());
        }
    } else if (value.contains("error") && value.at("error").is_string()) {
        entry.error = value.at("error").get<std::string>();
    } else {
        throw bad("expected \"doc\" object or \"error\" string");
    }
    return entry;
}

std::vector<std::string> split_token_line(std::string_view line) {
    // A line holding only whitespace-separated <<...>> tokens is split into them.
    std::vector<std::string> pieces;
    std::size_t p = 0;
    while (p < line.size()) {
        while (p < line.size() && is_space(line[p])) ++p;
        if (p == line.size()) break;
        if (line.compare(p, 2, "<<") != 0) return {std::string(line)};
        const auto close = line.find(">>", p + 2);
        if (close == std::string_view::npos) return {std::string(line)};
        std::size_t end = close + 2;
        while (end < line.size() && line[end] == '>') ++end;
        pieces.emplace_back(line.substr(p, end - p));
        p = end;
        if (p < line.size() && !is_space(line[p])) return {std::string(line)};
    }
    return pieces;
}

Segment make_segment(Tag tag, std::string_view body, std::size_t body_offset, std::size_t tag_offset) {
    switch (tag) {
        case Tag::Think: return Think{std::string(body)};
        case Tag::Response: return Response{std::string(body)};
        case Tag::ToolToken: {
            ToolTokens tokens;
            for (const auto& line : split_lines(body)) {
                const auto t = trim(line.text);
                if (t.empty()) continue;
                for (auto& piece : split_token_line(t)) tokens.surfaces.push_back(std::move(piece));
            }
            if (tokens.surfaces.empty()) throw ParseError(tag_offset, "empty <tool_token> block");
            return tokens;
        }
        case Tag::ToolCall: {
            ToolCalls calls;
            for (const auto& line : split_lines(body)) {
                if (trim(line.text).empty()) continue;
                try {
                    calls.calls.push_back(parse_call_line(line.text));
                } catch (const ParseError& e) {
                    throw ParseError(body_offset + line.offset + e.offset(), e.reason());
                }
            }
            if (calls.calls.empty()) throw ParseError(tag_offset, "empty <tool_call> block");
            return calls;
        }
        case Tag::Obs: {
            const auto lines = split_lines(body);
            std::size_t first = 0;
            while (first < lines.size() && trim(lines[first].text).empty()) ++first;
            if (first == lines.size() || trim(lines[first].text) != "doc:") return Observation{std::string(body)};
            ToolDocs docs;
            for (std::size_t i = first + 1; i < lines.size(); ++i) {
                const auto t = trim(lines[i].text);
                if (t.empty()) continue;
                docs.entries.push_back(parse_doc_line(t, body_offset + lines[i].offset));
            }
            return docs;
        }
        case Tag::User: break;
    }
    return Think{};
}

}  // namespace

std::string_view to_string(SegmentKind kind) {
    switch (kind) {
        case SegmentKind::Think: return "Think";
        case SegmentKind::ToolTokenBlock: return "ToolTokenBlock";
        case SegmentKind::ToolDocBlock: return "ToolDocBlock";
        case SegmentKind::ToolCallBlock: return "ToolCallBlock";
        case SegmentKind::Observation: return "Observation";
        case SegmentKind::Response: return "Response";
    }
    return "Think";
}

std::optional<TurnState> advance(TurnState state, SegmentKind kind) {
    using S = TurnState;
    using K = SegmentKind;
    switch (state) {
        case S::Start:
            if (kind == K::Think) return S::Thought;
            if (kind == K::Response) return S::Responded;
            break;
        case S::Thought:
            if (kind == K::ToolTokenBlock) return S::Tokens;
            if (kind == K::ToolCallBlock) return S::Called;
            if (kind == K::Response) return S::Responded;
            break;
        case S::Tokens:
            if (kind == K::ToolDocBlock) return S::Docs;
            if (kind == K::Think) return S::PlanningCall;
            if (kind == K::ToolCallBlock) return S::Called;
            break;
        case S::Docs:
            if (kind == K::Think) return S::PlanningCall;
            if (kind == K::ToolCallBlock) return S::Called;
            break;
        case S::PlanningCall:
            if (kind == K::ToolCallBlock) return S::Called;
            break;
        case S::Called:
            if (kind == K::Observation) return S::Observed;
            break;
        case S::Observed:
            if (kind == K::Think) return S::Thought;
            if (kind == K::Response) return S::Responded;
            break;
        case S::Responded: break;
    }
    return std::nullopt;
}

TurnState turn_state(const Turn& turn) {
    TurnState state = TurnState::Start;
    for (const auto& s : turn.segments) {
        auto next = advance(state, kind_of(s));
        if (!next) return state;
        state = *next;
    }
    return state;
}

bool is_complete(TurnState state) { return state == TurnState::Called || state == TurnState::Responded; }

ToolCall parse_call_line(std::string_view line) {
    std::size_t lead = 0;
    while (lead < line.size() && is_space(line[lead])) ++lead;
    const Json value = parse_strict_object(trim(line), lead, "call line");
    if (value.size() != 2 || !value.contains("token") || !value.contains("parameters")) {
        throw ParseError(lead, "malformed call line: expected exactly the keys \"token\" and \"parameters\"");
    }
    const Json& token = value.at("token");
    if (!token.is_string() || token.get_ref<const std::string&>().empty()) {
        throw ParseError(lead, "malformed call line: \"token\" must be a non-empty string");
    }
    if (!value.at("parameters").is_object()) {
        throw ParseError(lead, "malformed call line: \"parameters\" must be an object");
    }
    return ToolCall{token.get<std::string>(), value.at("parameters")};
}

Trajectory parse(std::string_view text, ParseDiagnostics* diagnostics) {
    Trajectory trajectory;
    ParseDiagnostics diag;
    TurnState state = TurnState::Start;
    std::size_t pos = 0;
    while (pos < text.size()) {
        const char c = text[pos];
        if (is_space(c)) {
            ++pos;
            continue;
        }
        if (c == '<') {
            if (auto m = match_known(text, pos)) {
                if (m->closing) {
                    throw ParseError(pos, "closing tag </" + std::string(name_of(m->tag)) + "> without an opening tag");
                }
                const std::size_t body_start = pos + m->length;
                std::size_t scan = body_start;
                std::size_t body_end = std::string_view::npos;
                while (true) {
                    scan = text.find('<', scan);
                    if (scan == std::string_view::npos) break;
                    if (auto inner = match_known(text, scan)) {
                        if (inner->closing && inner->tag == m->tag) {
                            body_end = scan;
                            break;
                        }
                        throw ParseError(scan, "unexpected <" + std::string(inner->closing ? "/" : "") +
                                                   std::string(name_of(inner->tag)) + "> inside <" +
                                                   std::string(name_of(m->tag)) + ">");
                    }
                    ++scan;
                }
                if (body_end == std::string_view::npos) {
                    throw ParseError(pos, "unclosed <" + std::string(name_of(m->tag)) + ">");
                }
                const std::string_view body = text.substr(body_start, body_end - body_start);
                if (m->tag == Tag::User) {
                    trajectory.turns.push_back(Turn{std::string(body), {}});
                    state = TurnState::Start;
                } else {
                    Segment segment = make_segment(m->tag, body, body_start, pos);
                    if (trajectory.turns.empty()) trajectory.turns.emplace_back();
                    const auto next = advance(state, kind_of(segment));
                    if (!next) {
                        throw ParseError(pos, "tags out of order: " + std::string(to_string(kind_of(segment))) +
                                                  " cannot follow the preceding block");
                    }
                    state = *next;
                    trajectory.turns.back().segments.push_back(std::move(segment));
                }
                pos = body_end + m->length + 1;
                continue;
            }
            if (match_any_tag(text, pos) > 0) throw ParseError(pos, "unknown tag");
        }
        diag.stray_text = true;
        if (c == '<' || c == '>') diag.stray_tag_text = true;
        ++pos;
    }
    if (diagnostics) *diagnostics = diag;
    return trajectory;
}

namespace {

// Positions of recognized tags that would be live in `text`.
std::vector<std::size_t> live_tags(std::string_view text) {
    std::vector<std::size_t> out;
    for (std::size_t p = text.find('<'); p != std::string_view::npos; p = text.find('<', p + 1)) {
        if (match_known(text, p)) out.push_back(p);
    }
    return out;
}

std::string replace_at(std::string_view text, const std::vector<std::size_t>& positions, std::string_view with) {
    std::string out;
    std::size_t last = 0;
    for (std::size_t p : positions) {
        out.append(text.substr(last, p - last));
        out.append(with);
        last = p + 1;
    }
    out.append(text.substr(last));
    return out;
}

// '<' only occurs inside JSON strings, where \u003c decodes back to it.
std::string dump_inert(const Json& value) {
    const std::string text = compact_dump(value);
    return replace_at(text, live_tags(text), "\\u003c");
}

}  // namespace

std::string escape_block_text(std::string_view text) {
    auto positions = live_tags(text);
    if (!text.empty() && text.back() == '<' && (positions.empty() || positions.back() != text.size() - 1)) {
        positions.push_back(text.size() - 1);
    }
    return replace_at(text, positions, "&lt;");
}

std::string render_call_line(const ToolCall& call) {
    return "{\"token\":" + dump_inert(Json(call.token)) + ",\"parameters\":" + dump_inert(call.parameters) + "}";
}

std::string render_call_block(const std::vector<ToolCall>& calls) {
    std::string out = "<tool_call>\n";
    for (const auto& c : calls) out += render_call_line(c) + "\n";
    return out + "</tool_call>";
}

std::string serialize_segment(const Segment& segment) {
    struct Renderer {
        std::string operator()(const Think& s) const { return "<think>" + s.text + "</think>"; }
        std::string operator()(const ToolTokens& s) const {
            std::string out = "<tool_token>\n";
            for (const auto& surface : s.surfaces) out += surface + "\n";
            return out + "</tool_token>";
        }
        std::string operator()(const ToolDocs& s) const {
            std::string out = "<obs>\ndoc:\n";
            for (const auto& e : s.entries) {
                Json line = {{"token", e.token}};
                if (e.doc) {
                    line["doc"] = e.doc->to_json();
                } else {
                    line["error"] = e.error;
                }
                out += dump_inert(line) + "\n";
            }
            return out + "</obs>";
        }
        std::string operator()(const ToolCalls& s) const { return render_call_block(s.calls); }
        std::string operator()(const Observation& s) const { return "<obs>" + s.text + "</obs>"; }
        std::string operator()(const Response& s) const { return "<response>" + s.text + "</response>"; }
    };
    return std::visit(Renderer{}, segment);
}

std::string serialize_turn(const Turn& turn, bool emit_empty_user) {
    std::string out;
    if (emit_empty_user || !turn.user_text.empty()) out = "<user>" + turn.user_text + "</user>";
    for (const auto& s : turn.segments) {
        if (!out.empty()) out += "\n";
        out += serialize_segment(s);
    }
    return out;
}

std::string serialize(const Trajectory& trajectory) {
    std::string out;
    for (std::size_t i = 0; i < trajectory.turns.size(); ++i) {
        const auto& turn = trajectory.turns[i];
        const bool implicit = i == 0 && turn.user_text.empty() && !turn.segments.empty();
        if (i > 0) out += "\n";
        out += serialize_turn(turn, !implicit);
    }
    return out;
}

bool check_prefix(std::string_view text) {
    try {
        ParseDiagnostics diag;
        parse(text, &diag);
        return !diag.stray_tag_text;
    } catch (const ParseError&) {
        return false;
    }
}

bool check_format(std::string_view text) {
    try {
        ParseDiagnostics diag;
        const Trajectory t = parse(text, &diag);
        if (diag.stray_tag_text || t.turns.empty()) return false;
        for (const auto& turn : t.turns) {
            if (!is_complete(turn_state(turn))) return false;
        }
        return true;
    } catch (const ParseError&) {
        return false;
    }
}

std::vector<Step> extract_steps(const Trajectory& trajectory) {
    std::vector<Step> steps;
    for (std::size_t t = 0; t < trajectory.turns.size(); ++t) {
        std::optional<Step> open;
        auto flush = [&] {
            if (open) steps.push_back(std::move(*open));
            open.reset();
        };
        for (const auto& segment : trajectory.turns[t].segments) {
            if (const auto* tokens = std::get_if<ToolTokens>(&segment)) {
                flush();
                open = Step{t, tokens->surfaces, {}, true, false};
            } else if (const auto* calls = std::get_if<ToolCalls>(&segment)) {
                if (open && !open->has_call_block) {
                    open->calls = calls->calls;
                    open->has_call_block = true;
                } else {
                    flush();
                    open = Step{t, {}, calls->calls, false, true};
                }
            } else if (std::holds_alternative<Observation>(segment) || std::holds_alternative<Response>(segment)) {
                flush();
            }
        }
        flush();
    }
    return steps;
}

std::vector<std::vector<ToolCall>> extract_calls(const Trajectory& trajectory) {
    std::vector<std::vector<ToolCall>> out;
    for (auto& step : extract_steps(trajectory)) out.push_back(std::move(step.calls));
    return out;
}

}  // namespace tinr
