#include "generators.hpp"

#include <array>
#include <regex>

namespace tinr::testing {

std::size_t uniform(Rng& rng, std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

bool coin(Rng& rng, double p) { return std::bernoulli_distribution(p)(rng); }

namespace {

const std::array<std::string, 22> kPieces = {"a",  "tool", " ",  "\n", "<",   ">",    "/",  "\"", "{", "}", "é",
                                             "λ",  ":",    "doc", "x1", "<<",  ">>",   "\t", "[",  "&", "think", "_"};

bool safe_text(const std::string& s) {
    static const std::regex live(R"((^|[^<])</?(user|think|tool_token|tool_call|obs|response)>)");
    if (std::regex_search(s, live)) return false;
    if (!s.empty() && s.back() == '<') return false;
    return true;
}

}  // namespace

std::string random_text(Rng& rng, std::size_t max_len) {
    while (true) {
        std::string s;
        const std::size_t n = uniform(rng, 0, max_len);
        for (std::size_t i = 0; i < n; ++i) s += kPieces[uniform(rng, 0, kPieces.size() - 1)];
        if (safe_text(s)) return s;
    }
}

Json random_json_value(Rng& rng, int depth) {
    switch (uniform(rng, 0, depth > 0 ? 7 : 5)) {
        case 0: return static_cast<std::int64_t>(uniform(rng, 0, 2000)) - 1000;
        case 1: return std::uniform_real_distribution<double>(-1e3, 1e3)(rng);
        case 2: return coin(rng);
        case 3: return nullptr;
        case 4:
        case 5: return random_text(rng, 6);
        case 6: {
            Json a = Json::array();
            const std::size_t n = uniform(rng, 0, 3);
            for (std::size_t i = 0; i < n; ++i) a.push_back(random_json_value(rng, depth - 1));
            return a;
        }
        default: {
            Json o = Json::object();
            const std::size_t n = uniform(rng, 0, 3);
            for (std::size_t i = 0; i < n; ++i) o["k" + std::to_string(uniform(rng, 0, 9))] = random_json_value(rng, depth - 1);
            return o;
        }
    }
}

Json random_params(Rng& rng) {
    static const std::array<const char*, 6> kNames = {"city", "name", "limit", "date", "ids", "filter"};
    Json params = Json::object();
    const std::size_t n = uniform(rng, 0, 4);
    for (std::size_t i = 0; i < n; ++i) params[kNames[uniform(rng, 0, kNames.size() - 1)]] = random_json_value(rng, 2);
    return params;
}

Trajectory random_trajectory(Rng& rng, const std::vector<std::string>& surfaces, const std::vector<ToolDoc>& docs) {
    auto pick = [&] { return uniform(rng, 0, surfaces.size() - 1); };
    auto calls = [&] {
        ToolCalls c;
        const std::size_t n = uniform(rng, 1, 3);
        for (std::size_t i = 0; i < n; ++i) c.calls.push_back({surfaces[pick()], random_params(rng)});
        return c;
    };
    auto observation_text = [&] {
        while (true) {
            std::string s = random_text(rng, 12);
            const auto first = s.find_first_not_of(" \t\r\n");
            const auto eol = s.find('\n', first == std::string::npos ? 0 : first);
            if (first == std::string::npos) return s;
            std::string line = s.substr(first, (eol == std::string::npos ? s.size() : eol) - first);
            while (!line.empty() && (line.back() == ' ' || line.back() == '\t' || line.back() == '\r')) line.pop_back();
            if (line != "doc:") return s;
        }
    };

    Trajectory t;
    const std::size_t turns = uniform(rng, 1, 3);
    for (std::size_t ti = 0; ti < turns; ++ti) {
        Turn turn;
        turn.user_text = ti == 0 && coin(rng, 0.3) ? std::string{} : random_text(rng, 10);
        const std::size_t steps = uniform(rng, 0, 3);
        const bool end_with_call = coin(rng, 0.3) && steps > 0;
        for (std::size_t s = 0; s < steps; ++s) {
            turn.segments.push_back(Think{random_text(rng, 16)});
            if (coin(rng, 0.7)) {
                ToolTokens tokens;
                const std::size_t n = uniform(rng, 1, 3);
                for (std::size_t i = 0; i < n; ++i) tokens.surfaces.push_back(surfaces[pick()]);
                turn.segments.push_back(tokens);
                if (coin(rng, 0.8)) {
                    ToolDocs d;
                    for (const auto& surface : tokens.surfaces) {
                        if (coin(rng, 0.85)) {
                            const std::size_t i = static_cast<std::size_t>(
                                std::find(surfaces.begin(), surfaces.end(), surface) - surfaces.begin());
                            d.entries.push_back({surface, docs[i], {}});
                        } else {
                            d.entries.push_back({surface, std::nullopt, "unregistered tool token"});
                        }
                    }
                    turn.segments.push_back(d);
                }
                if (coin(rng, 0.4)) turn.segments.push_back(Think{random_text(rng, 8)});
            }
            turn.segments.push_back(calls());
            if (s + 1 == steps && end_with_call) break;
            turn.segments.push_back(Observation{observation_text()});
        }
        if (!end_with_call) {
            if (steps == 0 || coin(rng, 0.5)) turn.segments.push_back(Think{random_text(rng, 10)});
            turn.segments.push_back(Response{random_text(rng, 12)});
        }
        if (turn.segments.empty()) turn.segments.push_back(Response{"ok"});
        t.turns.push_back(std::move(turn));
    }
    return t;
}

std::string mutate_one_byte(Rng& rng, const std::string& text) {
    static const std::string kInteresting = "<>/{}\":,[]\n \tdok_#";
    auto byte = [&]() -> char {
        if (coin(rng, 0.6)) return kInteresting[uniform(rng, 0, kInteresting.size() - 1)];
        return static_cast<char>(uniform(rng, 0, 255));
    };
    std::string out = text;
    const std::size_t op = text.empty() ? 1 : uniform(rng, 0, 2);
    if (op == 0) {
        out[uniform(rng, 0, out.size() - 1)] = byte();
    } else if (op == 1) {
        out.insert(out.begin() + static_cast<std::ptrdiff_t>(uniform(rng, 0, out.size())), byte());
    } else {
        out.erase(out.begin() + static_cast<std::ptrdiff_t>(uniform(rng, 0, out.size() - 1)));
    }
    return out;
}

}  // namespace tinr::testing
