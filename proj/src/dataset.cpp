#include "tinr/dataset.hpp"

#include "tinr/io.hpp"

namespace tinr {

std::string_view to_string(Split split) {
    switch (split) {
        case Split::Train: return "train";
        case Split::TestSeen: return "test_seen";
        case Split::TestUnseen: return "test_unseen";
        case Split::Ood: return "ood";
    }
    return "train";
}

Split split_from_string(std::string_view name) {
    if (name == "train") return Split::Train;
    if (name == "test_seen") return Split::TestSeen;
    if (name == "test_unseen") return Split::TestUnseen;
    if (name == "ood") return Split::Ood;
    throw ValidationError("MalformedDataset", "unknown split '" + std::string(name) + "'");
}

StepCalls DatasetRecord::all_steps() const {
    StepCalls out;
    for (const auto& t : turns) out.insert(out.end(), t.gt_steps.begin(), t.gt_steps.end());
    return out;
}

std::set<std::string> DatasetRecord::gt_tokens() const {
    std::set<std::string> out;
    for (const auto& t : turns) {
        for (const auto& step : t.gt_steps) {
            for (const auto& c : step) out.insert(c.token);
        }
    }
    return out;
}

namespace {

ValidationError malformed(const std::string& id, const std::string& why) {
    return ValidationError("MalformedDataset", "record '" + id + "': " + why);
}

ToolCall call_from_json(const Json& json, const ToolRegistry& registry, bool in_domain, const std::string& id) {
    if (!json.is_object()) throw malformed(id, "ground-truth call must be an object");
    std::string reference;
    if (json.contains("token")) {
        reference = json.at("token").get<std::string>();
    } else if (json.contains("name")) {
        reference = json.at("name").get<std::string>();
    } else {
        throw malformed(id, "ground-truth call needs \"token\" or \"name\"");
    }
    Json params = json.value("parameters", Json::object());
    if (!params.is_object()) throw malformed(id, "\"parameters\" must be an object");
    if (auto surface = registry.normalize_reference(reference)) return ToolCall{*surface, std::move(params)};
    if (in_domain) {
        throw ValidationError("UnregisteredToolInDataset",
                              "record '" + id + "' references unregistered tool '" + reference + "'");
    }
    return ToolCall{reference, std::move(params)};
}

}  // namespace

DatasetRecord record_from_json(const Json& json, const ToolRegistry& registry) {
    DatasetRecord record;
    try {
        if (!json.is_object()) throw malformed("?", "record must be a JSON object");
        record.id = json.at("id").get<std::string>();
        if (record.id.empty()) throw malformed("?", "empty record id");
        record.split = split_from_string(json.value("split", std::string("train")));
        for (const auto& turn_json : json.at("turns")) {
            RecordTurn turn;
            turn.user_text = turn_json.value("user", std::string{});
            for (const auto& step_json : turn_json.value("steps", Json::array())) {
                std::vector<ToolCall> step;
                for (const auto& call : step_json) step.push_back(call_from_json(call, registry, record.in_domain(), record.id));
                turn.gt_steps.push_back(std::move(step));
            }
            if (turn_json.contains("observations")) {
                turn.observations = turn_json.at("observations").get<std::vector<std::vector<std::string>>>();
            }
            record.turns.push_back(std::move(turn));
        }
        if (record.turns.empty()) throw malformed(record.id, "record has no turns");
        record.instruction = json.value("instruction", record.turns.front().user_text);
    } catch (const Json::exception& e) {
        throw malformed(record.id.empty() ? "?" : record.id, e.what());
    }
    return record;
}

Json record_to_json(const DatasetRecord& record) {
    Json turns = Json::array();
    for (const auto& t : record.turns) {
        Json steps = Json::array();
        for (const auto& step : t.gt_steps) {
            Json calls = Json::array();
            for (const auto& c : step) calls.push_back({{"token", c.token}, {"parameters", c.parameters}});
            steps.push_back(std::move(calls));
        }
        Json turn = {{"user", t.user_text}, {"steps", std::move(steps)}};
        if (!t.observations.empty()) turn["observations"] = t.observations;
        turns.push_back(std::move(turn));
    }
    return Json{{"schema_version", kDatasetSchemaVersion},
                {"id", record.id},
                {"split", std::string(to_string(record.split))},
                {"instruction", record.instruction},
                {"turns", std::move(turns)}};
}

std::vector<DatasetRecord> parse_dataset(const std::string& jsonl, const ToolRegistry& registry) {
    std::vector<DatasetRecord> out;
    std::set<std::string> ids;
    for (const auto& line : parse_jsonl(jsonl)) {
        try {
            out.push_back(record_from_json(line.value, registry));
        } catch (const ValidationError& e) {
            throw ValidationError(e.kind(), "line " + std::to_string(line.line_number) + ": " + e.what());
        }
        if (!ids.insert(out.back().id).second) {
            throw ValidationError("MalformedDataset", "line " + std::to_string(line.line_number) +
                                                          ": duplicate record id '" + out.back().id + "'");
        }
    }
    return out;
}

std::vector<DatasetRecord> load_dataset(const std::filesystem::path& path, const ToolRegistry& registry) {
    return parse_dataset(read_file(path), registry);
}

const DatasetRecord* find_record(const std::vector<DatasetRecord>& records, std::string_view id) {
    for (const auto& r : records) {
        if (r.id == id) return &r;
    }
    return nullptr;
}

}  // namespace tinr
