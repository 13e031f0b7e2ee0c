#include "tinr/dataconstruct.hpp"

#include "tinr/rewards.hpp"

#include <algorithm>
#include <cctype>
#include <random>
#include <set>
#include <unordered_map>

namespace tinr {

namespace {

std::vector<std::string> documentation_texts(const ToolRegistry& registry) {
    std::vector<std::string> docs;
    docs.reserve(registry.size());
    for (const auto& t : registry.tools()) docs.push_back(t.search_text());
    return docs;
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Uniform in [0, bound) by rejection; independent of the standard library's distributions.
std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t bound) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t draw;
    do {
        draw = rng();
    } while (draw >= limit);
    return draw % bound;
}

}  // namespace

Bm25Retriever::Bm25Retriever(const ToolRegistry& registry, Bm25Params params)
    : index_(documentation_texts(registry), params) {}

RankedTools Bm25Retriever::rank(std::string_view query) const {
    const auto scores = index_.scores(query);
    RankedTools ranked;
    ranked.reserve(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) ranked.emplace_back(i, scores[i]);
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    return ranked;
}

RankedTools lexical_rank(std::string_view query, const ToolRegistry& registry) {
    return Bm25Retriever(registry).rank(query);
}

std::string_view to_string(Provenance p) {
    switch (p) {
        case Provenance::GroundTruth: return "ground_truth";
        case Provenance::Retrieved: return "retrieved";
        case Provenance::Random: return "random";
    }
    return "random";
}

Json CandidateSet::to_json(const ToolRegistry& registry) const {
    Json surfaces = Json::array();
    Json origins = Json::array();
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        surfaces.push_back(registry.token(candidates[i]).surface);
        origins.push_back(std::string(to_string(provenance[i])));
    }
    return Json{{"record_id", record_id}, {"candidates", std::move(surfaces)}, {"provenance", std::move(origins)}};
}

CandidateSet sample_candidates(const DatasetRecord& record, const ToolRegistry& registry, std::size_t k,
                               std::size_t retrieved_count, std::uint64_t seed, const Retriever& retriever) {
    CandidateSet out;
    out.record_id = record.id;
    std::vector<bool> taken(registry.size(), false);
    for (const auto& step : record.all_steps()) {
        for (const auto& call : step) {
            const auto hit = registry.resolve(call.token);
            if (!hit) {
                throw ValidationError("UnregisteredToolInDataset",
                                      "record '" + record.id + "' references unregistered tool '" + call.token + "'");
            }
            const auto index = hit->token->tool_index;
            if (taken[index]) continue;
            taken[index] = true;
            out.candidates.push_back(index);
            out.provenance.push_back(Provenance::GroundTruth);
        }
    }
    if (out.candidates.size() > k) {
        throw ValidationError("TooManyGroundTruthTools", "record '" + record.id + "' has " +
                                                             std::to_string(out.candidates.size()) +
                                                             " ground-truth tools but k = " + std::to_string(k));
    }
    if (registry.size() < k) {
        throw ValidationError("InsufficientTools", "registry holds " + std::to_string(registry.size()) +
                                                       " tools, fewer than k = " + std::to_string(k));
    }

    const std::size_t retrieve = std::min(retrieved_count, k - out.candidates.size());
    std::size_t retrieved = 0;
    for (const auto& [index, score] : retriever.rank(record.instruction)) {
        if (retrieved == retrieve) break;
        if (taken[index]) continue;
        taken[index] = true;
        out.candidates.push_back(index);
        out.provenance.push_back(Provenance::Retrieved);
        ++retrieved;
    }

    std::vector<std::size_t> pool;
    for (std::size_t i = 0; i < registry.size(); ++i) {
        if (!taken[i]) pool.push_back(i);
    }
    std::mt19937_64 rng(splitmix64(seed ^ splitmix64(fnv1a(record.id))));
    for (std::size_t filled = 0; out.candidates.size() < k; ++filled) {
        const auto pick = filled + static_cast<std::size_t>(bounded(rng, pool.size() - filled));
        std::swap(pool[filled], pool[pick]);
        out.candidates.push_back(pool[filled]);
        out.provenance.push_back(Provenance::Random);
    }
    return out;
}

CandidateSet sample_candidates(const DatasetRecord& record, const ToolRegistry& registry, std::size_t k,
                               std::size_t retrieved_count, std::uint64_t seed) {
    return sample_candidates(record, registry, k, retrieved_count, seed, Bm25Retriever(registry));
}

bool calls_exact_match(const std::vector<ToolCall>& pred, const std::vector<ToolCall>& gt) {
    if (pred.size() != gt.size()) return false;
    // Search for a perfect pairing; duplicate tokens may pair in any order.
    std::vector<bool> used(pred.size(), false);
    for (const auto& g : gt) {
        bool found = false;
        for (std::size_t j = 0; j < pred.size() && !found; ++j) {
            if (!used[j] && pred[j].token == g.token && values_equal(pred[j].parameters, g.parameters)) {
                used[j] = true;
                found = true;
            }
        }
        if (!found) return false;
    }
    return true;
}

FilterResult reject_filter(const std::vector<std::string>& candidate_texts, const DatasetRecord& record,
                           const ToolRegistry& registry) {
    FilterResult result;
    const auto gt_steps = record.all_steps();
    for (std::size_t c = 0; c < candidate_texts.size(); ++c) {
        const auto& text = candidate_texts[c];
        if (!check_format(text)) {
            result.rejections.push_back({c, "bad format"});
            continue;
        }
        Trajectory trajectory = parse(text);
        auto steps = extract_calls(trajectory);
        for (auto& step : steps) {
            for (auto& call : step) {
                if (auto surface = registry.normalize_reference(call.token)) call.token = *surface;
            }
        }
        if (steps.size() != gt_steps.size()) {
            result.rejections.push_back({c, "step count " + std::to_string(steps.size()) + " != ground truth " +
                                                std::to_string(gt_steps.size())});
            continue;
        }
        std::string reason;
        for (std::size_t s = 0; s < steps.size() && reason.empty(); ++s) {
            if (calls_exact_match(steps[s], gt_steps[s])) continue;
            std::multiset<std::string> pred_tokens, gt_tokens;
            for (const auto& call : steps[s]) pred_tokens.insert(call.token);
            for (const auto& call : gt_steps[s]) gt_tokens.insert(call.token);
            reason = (pred_tokens != gt_tokens ? "wrong tools in step " : "wrong parameters in step ") + std::to_string(s);
        }
        if (!reason.empty()) {
            result.rejections.push_back({c, reason});
            continue;
        }
        result.accepted_indices.push_back(c);
        result.accepted.push_back(std::move(trajectory));
    }
    return result;
}

namespace {

bool is_word(char c) {
    const auto uc = static_cast<unsigned char>(c);
    return uc >= 0x80 || std::isalnum(uc) || c == '_';
}

class NameMatcher {
public:
    explicit NameMatcher(const ToolRegistry& registry) {
        for (std::size_t i = 0; i < registry.size(); ++i) {
            const auto& name = registry.tool(i).name;
            if (name.empty() || registry.index_of_name(name) != i) continue;
            by_first_[static_cast<unsigned char>(name.front())].push_back({name, registry.token(i).surface});
        }
        for (auto& [first, names] : by_first_) {
            std::stable_sort(names.begin(), names.end(),
                             [](const auto& a, const auto& b) { return a.first.size() > b.first.size(); });
        }
    }

    std::string substitute(std::string_view text) const {
        std::string out;
        out.reserve(text.size());
        std::size_t i = 0;
        while (i < text.size()) {
            if (text.compare(i, 2, "<<") == 0) {
                const auto close = text.find(">>", i + 2);
                if (close != std::string_view::npos) {
                    std::size_t end = close + 2;
                    while (end < text.size() && text[end] == '>') ++end;
                    out.append(text.substr(i, end - i));
                    i = end;
                    continue;
                }
            }
            if (auto hit = match_at(text, i)) {
                out += hit->second;
                i += hit->first;
                continue;
            }
            out.push_back(text[i]);
            ++i;
        }
        return out;
    }

private:
    // (length matched, replacement)
    std::optional<std::pair<std::size_t, std::string>> match_at(std::string_view text, std::size_t i) const {
        auto it = by_first_.find(static_cast<unsigned char>(text[i]));
        if (it == by_first_.end()) return std::nullopt;
        for (const auto& [name, surface] : it->second) {
            if (text.compare(i, name.size(), name) != 0) continue;
            const bool left_ok = !is_word(name.front()) || i == 0 || !is_word(text[i - 1]);
            const std::size_t end = i + name.size();
            const bool right_ok = !is_word(name.back()) || end == text.size() || !is_word(text[end]);
            if (left_ok && right_ok) return std::make_pair(name.size(), surface);
        }
        return std::nullopt;
    }

    std::unordered_map<unsigned char, std::vector<std::pair<std::string, std::string>>> by_first_;
};

std::string to_surface(const std::string& reference, const ToolRegistry& registry) {
    if (auto surface = registry.normalize_reference(reference)) return *surface;
    throw ValidationError("UnknownToolNameInCall", "'" + reference + "' is neither a tool name nor a token surface");
}

}  // namespace

std::string substitute_tool_names(std::string_view text, const ToolRegistry& registry) {
    return NameMatcher(registry).substitute(text);
}

Trajectory format_trajectory(const Trajectory& raw, const ToolRegistry& registry) {
    const NameMatcher matcher(registry);
    Trajectory out = raw;
    for (auto& turn : out.turns) {
        for (auto& segment : turn.segments) {
            if (auto* think = std::get_if<Think>(&segment)) {
                think->text = matcher.substitute(think->text);
            } else if (auto* calls = std::get_if<ToolCalls>(&segment)) {
                for (auto& call : calls->calls) call.token = to_surface(call.token, registry);
            } else if (auto* tokens = std::get_if<ToolTokens>(&segment)) {
                for (auto& surface : tokens->surfaces) surface = to_surface(surface, registry);
            }
        }
    }
    return out;
}

}  // namespace tinr
