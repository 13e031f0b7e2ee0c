#include "tinr/losses.hpp"

#include "tinr/prompt.hpp"
#include "tinr/trajectory.hpp"

#include <cmath>
#include <unordered_map>

namespace tinr {

std::string_view to_string(Phase phase) {
    switch (phase) {
        case Phase::Memorization: return "memorization";
        case Phase::Recall: return "recall";
        case Phase::Usage: return "usage";
        case Phase::Sft: return "sft";
    }
    return "usage";
}

Phase phase_from_string(std::string_view name) {
    if (name == "memorization") return Phase::Memorization;
    if (name == "recall") return Phase::Recall;
    if (name == "usage") return Phase::Usage;
    if (name == "sft") return Phase::Sft;
    throw ValidationError("MalformedExample", "unknown phase '" + std::string(name) + "'");
}

Json TrainingExample::to_json() const {
    return Json{{"example_id", id},
                {"phase", std::string(to_string(phase))},
                {"context", context_text},
                {"target", target_text},
                {"weight", weight},
                {"prompt_version", kExamplePromptVersion}};
}

TrainingExample TrainingExample::from_json(const Json& json) {
    try {
        TrainingExample e;
        e.id = json.at("example_id").get<std::string>();
        e.phase = phase_from_string(json.at("phase").get<std::string>());
        e.context_text = json.value("context", std::string{});
        e.target_text = json.at("target").get<std::string>();
        e.weight = json.value("weight", 1.0);
        if (e.target_text.empty() || !(e.weight > 0.0)) {
            throw ValidationError("MalformedExample", "example '" + e.id + "' needs a non-empty target and weight > 0");
        }
        return e;
    } catch (const Json::exception& ex) {
        throw ValidationError("MalformedExample", ex.what());
    }
}

std::vector<TrainingExample> build_phase1_examples(const ToolRegistry& registry,
                                                   const std::vector<DatasetRecord>& dataset) {
    std::vector<TrainingExample> out;
    out.reserve(2 * registry.size() + dataset.size());
    for (std::size_t i = 0; i < registry.size(); ++i) {
        const std::string doc = registry.tool(i).canonical();
        const std::string& surface = registry.token(i).surface;
        out.push_back({"memorization:" + std::to_string(i), Phase::Memorization,
                       doc + "\n" + std::string(kMemorizationInstruction), surface, 1.0});
        out.push_back({"recall:" + std::to_string(i), Phase::Recall,
                       surface + "\n" + std::string(kRecallInstruction), doc, 1.0});
    }
    for (const auto& record : dataset) {
        std::vector<ToolCall> action;
        for (const auto& step : record.all_steps()) {
            for (const auto& call : step) {
                if (!registry.resolve(call.token)) {
                    throw ValidationError("UnregisteredToolInDataset", "record '" + record.id +
                                                                           "' references unregistered tool '" +
                                                                           call.token + "'");
                }
                action.push_back(call);
            }
        }
        if (action.empty()) {
            throw ValidationError("MalformedDataset", "record '" + record.id + "' has no ground-truth calls");
        }
        out.push_back({"usage:" + record.id, Phase::Usage, record.instruction, render_call_block(action), 1.0});
    }
    return out;
}

SftRecord SftRecord::from_json(const Json& json) {
    try {
        SftRecord r;
        r.id = json.contains("record_id") ? json.at("record_id").get<std::string>() : json.at("id").get<std::string>();
        r.instruction = json.at("instruction").get<std::string>();
        r.trajectory_text = json.at("trajectory").get<std::string>();
        return r;
    } catch (const Json::exception& e) {
        throw ValidationError("MalformedTrajectoryInDataset", std::string("malformed SFT record: ") + e.what());
    }
}

Json SftRecord::to_json() const {
    return Json{{"record_id", id}, {"instruction", instruction}, {"trajectory", trajectory_text}};
}

std::vector<TrainingExample> build_sft_examples(const std::vector<SftRecord>& records, const ToolRegistry& registry) {
    std::vector<TrainingExample> out;
    out.reserve(records.size());
    for (const auto& record : records) {
        auto fail = [&record](const std::string& why) {
            return ValidationError("MalformedTrajectoryInDataset", "record '" + record.id + "': " + why);
        };
        if (!check_format(record.trajectory_text)) throw fail("trajectory fails the format check");
        Trajectory trajectory = parse(record.trajectory_text);
        for (const auto& step : extract_steps(trajectory)) {
            for (const auto& surface : step.tokens) {
                if (!registry.resolve(surface)) throw fail("unregistered tool token '" + surface + "'");
            }
            for (const auto& call : step.calls) {
                if (!registry.resolve(call.token)) throw fail("call uses unsubstituted or unknown tool '" + call.token + "'");
            }
        }
        // The first user turn belongs to the context; the rest is the target.
        std::string user = record.instruction;
        if (!trajectory.turns.empty() && !trajectory.turns.front().user_text.empty()) {
            user = trajectory.turns.front().user_text;
        }
        std::string target;
        for (std::size_t t = 0; t < trajectory.turns.size(); ++t) {
            Turn turn = trajectory.turns[t];
            if (t == 0) turn.user_text.clear();
            const std::string rendered = serialize_turn(turn, t > 0);
            if (rendered.empty()) continue;
            if (!target.empty()) target += "\n";
            target += rendered;
        }
        if (target.empty()) throw fail("empty trajectory");
        out.push_back({"sft:" + record.id, Phase::Sft,
                       std::string(kSystemPrompt) + "\n\n<user>" + user + "</user>", std::move(target), 1.0});
    }
    return out;
}

double LossReport::per_token_mean(Phase phase) const {
    auto it = token_counts.find(phase);
    if (it == token_counts.end() || it->second == 0) return 0.0;
    double loss = 0.0;
    switch (phase) {
        case Phase::Memorization: loss = memorization; break;
        case Phase::Recall: loss = recall; break;
        case Phase::Usage: loss = usage; break;
        case Phase::Sft: loss = sft; break;
    }
    return loss / static_cast<double>(it->second);
}

Json LossReport::to_json() const {
    Json counts = Json::object();
    Json means = Json::object();
    for (Phase p : {Phase::Memorization, Phase::Recall, Phase::Usage, Phase::Sft}) {
        auto it = token_counts.find(p);
        counts[std::string(to_string(p))] = it == token_counts.end() ? 0 : it->second;
        means[std::string(to_string(p))] = per_token_mean(p);
    }
    return Json{{"schema_version", 1},       {"memorization", memorization}, {"recall", recall},
                {"usage", usage},            {"phase1_total", phase1_total}, {"sft", sft},
                {"alpha", alpha},            {"beta", beta},                 {"token_counts", counts},
                {"per_token_mean", means}};
}

LossReport aggregate_losses(const std::vector<TrainingExample>& examples,
                            const std::vector<std::vector<double>>& logprobs, double alpha, double beta) {
    if (examples.size() != logprobs.size()) {
        throw ValidationError("LengthMismatch", std::to_string(logprobs.size()) + " logprob lists for " +
                                                    std::to_string(examples.size()) + " examples");
    }
    if (!std::isfinite(alpha) || !std::isfinite(beta)) throw ValidationError("NonFiniteInput", "alpha and beta must be finite");
    LossReport report;
    report.alpha = alpha;
    report.beta = beta;
    for (std::size_t i = 0; i < examples.size(); ++i) {
        const auto& lp = logprobs[i];
        if (lp.empty()) throw ValidationError("LengthMismatch", "example '" + examples[i].id + "' has no target logprobs");
        double sum = 0.0;
        for (double v : lp) {
            if (std::isnan(v)) throw ValidationError("NonFiniteInput", "NaN logprob in example '" + examples[i].id + "'");
            if (v > 0.0) throw ValidationError("PositiveLogProb", "positive logprob in example '" + examples[i].id + "'");
            sum += v;
        }
        const double loss = -examples[i].weight * sum;
        switch (examples[i].phase) {
            case Phase::Memorization: report.memorization += loss; break;
            case Phase::Recall: report.recall += loss; break;
            case Phase::Usage: report.usage += loss; break;
            case Phase::Sft: report.sft += loss; break;
        }
        report.token_counts[examples[i].phase] += lp.size();
    }
    report.phase1_total = report.memorization + alpha * report.recall + beta * report.usage;
    return report;
}

LossReport aggregate_losses(const std::vector<TrainingExample>& examples, const Json& logprob_messages, double alpha,
                            double beta) {
    if (!logprob_messages.is_array()) throw ValidationError("MalformedLogprobs", "logprobs must be a JSON array");
    std::unordered_map<std::string, std::size_t> by_id;
    for (std::size_t i = 0; i < examples.size(); ++i) by_id.emplace(examples[i].id, i);
    std::vector<TrainingExample> selected;
    std::vector<std::vector<double>> values;
    for (const auto& message : logprob_messages) {
        try {
            const auto id = message.at("example_id").get<std::string>();
            auto it = by_id.find(id);
            if (it == by_id.end()) throw ValidationError("UnknownExample", "unknown example id '" + id + "'");
            selected.push_back(examples[it->second]);
            values.push_back(message.at("logprobs").get<std::vector<double>>());
        } catch (const Json::exception& e) {
            throw ValidationError("MalformedLogprobs", e.what());
        }
    }
    return aggregate_losses(selected, values, alpha, beta);
}

}  // namespace tinr
