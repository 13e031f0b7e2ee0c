#include "fixture.hpp"

#include "tinr/trajectory.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <random>

namespace tinr::testing {

namespace {

constexpr std::array<const char*, 6> kVerbs = {"get", "list", "search", "create", "update", "delete"};
constexpr std::array<const char*, 10> kNouns = {"weather", "flight", "hotel",  "team",   "player",
                                                "stock",   "movie",  "recipe", "song", "book"};
constexpr std::array<const char*, 10> kFields = {"city", "airport", "district", "league", "position",
                                                 "ticker", "genre", "cuisine", "artist", "author"};

std::string capitalized(std::string s) {
    s[0] = static_cast<char>(s[0] - 'a' + 'A');
    return s;
}

}  // namespace

std::vector<ToolDoc> fixture_tools() {
    std::vector<ToolDoc> tools;
    for (std::size_t v = 0; v < kVerbs.size(); ++v) {
        for (std::size_t n = 0; n < kNouns.size(); ++n) {
            ToolDoc doc;
            doc.name = std::string(kVerbs[v]) + capitalized(kNouns[n]);
            doc.description = capitalized(kVerbs[v]) + " " + kNouns[n] + " records filtered by " + kFields[n];
            doc.parameters.push_back({kFields[n], ValueType::String, true, "the " + std::string(kFields[n]), std::nullopt});
            if ((v + n) % 2 == 0) doc.parameters.push_back({"limit", ValueType::Integer, false, "maximum results", Json(10)});
            if ((v + n) % 3 == 0) doc.parameters.push_back({"verbose", ValueType::Boolean, false, "include details", std::nullopt});
            doc.normalize();
            tools.push_back(std::move(doc));
        }
    }
    return tools;
}

std::vector<ToolDoc> synthetic_tools(std::size_t n) {
    const int width = static_cast<int>(std::to_string(n).size());
    std::vector<ToolDoc> tools;
    tools.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        char name[64];
        std::snprintf(name, sizeof name, "tool_%0*zu_%s", width, i, kNouns[i % kNouns.size()]);
        ToolDoc doc;
        doc.name = name;
        doc.description = std::string("Synthetic ") + kNouns[i % kNouns.size()] + " operation number " + std::to_string(i);
        doc.parameters.push_back({"query", ValueType::String, true, "free-text query", std::nullopt});
        doc.normalize();
        tools.push_back(std::move(doc));
    }
    return tools;
}

ToolCall fixture_call(const ToolRegistry& registry, std::size_t tool, std::size_t salt) {
    const ToolDoc& doc = registry.tool(tool);
    Json params = Json::object();
    for (const auto& p : doc.parameters) {
        switch (p.value_type) {
            case ValueType::String: params[p.name] = p.name + "_" + std::to_string(salt); break;
            case ValueType::Integer: params[p.name] = static_cast<int>(salt % 7 + 1); break;
            case ValueType::Boolean: params[p.name] = salt % 2 == 0; break;
            default: break;
        }
    }
    return ToolCall{registry.token(tool).surface, std::move(params)};
}

std::vector<DatasetRecord> fixture_records(const ToolRegistry& registry, std::size_t count,
                                           std::size_t (*gt_per_record)(std::size_t), std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<DatasetRecord> records;
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t g = gt_per_record(i);
        std::vector<std::size_t> picked;
        while (picked.size() < g) {
            const std::size_t t = rng() % registry.size();
            if (std::find(picked.begin(), picked.end(), t) == picked.end()) picked.push_back(t);
        }
        DatasetRecord r;
        r.id = "rec-" + std::to_string(i);
        r.split = Split::Train;
        RecordTurn turn;
        std::string ask = "Please";
        std::vector<ToolCall> step;
        std::vector<std::string> observations;
        for (std::size_t t : picked) {
            const ToolDoc& doc = registry.tool(t);
            ask += " " + doc.description + ";";
            step.push_back(fixture_call(registry, t, i));
            observations.push_back("result of " + doc.name + " for record " + std::to_string(i));
        }
        turn.user_text = ask;
        turn.gt_steps.push_back(std::move(step));
        turn.observations.push_back(std::move(observations));
        r.instruction = turn.user_text;
        r.turns.push_back(std::move(turn));
        records.push_back(std::move(r));
    }
    return records;
}

std::string oracle_text(const DatasetRecord& record, const ToolRegistry& registry) {
    Trajectory t;
    for (const auto& rt : record.turns) {
        Turn turn{rt.user_text, {}};
        for (std::size_t s = 0; s < rt.gt_steps.size(); ++s) {
            const auto& step = rt.gt_steps[s];
            ToolTokens tokens;
            ToolDocs docs;
            for (const auto& call : step) {
                tokens.surfaces.push_back(call.token);
                docs.entries.push_back({call.token, *registry.resolve(call.token)->doc, {}});
            }
            turn.segments.push_back(Think{"I need these tools."});
            turn.segments.push_back(std::move(tokens));
            turn.segments.push_back(std::move(docs));
            turn.segments.push_back(ToolCalls{step});
            std::string obs;
            for (std::size_t c = 0; c < step.size(); ++c) {
                if (c > 0) obs += "\n";
                obs += s < rt.observations.size() && c < rt.observations[s].size() ? rt.observations[s][c] : "ok";
            }
            turn.segments.push_back(Observation{obs});
        }
        turn.segments.push_back(Think{"All done."});
        turn.segments.push_back(Response{"Here is what I found."});
        t.turns.push_back(std::move(turn));
    }
    return serialize(t);
}

std::shared_ptr<const ToolRegistry> fixture_registry(IndexStrategy strategy) {
    return std::make_shared<const ToolRegistry>(ToolRegistry::build(fixture_tools(), strategy));
}

}  // namespace tinr::testing
