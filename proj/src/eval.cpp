#include "tinr/eval.hpp"

#include "tinr/rewards.hpp"

#include <algorithm>
#include <cstdio>

namespace tinr {

IdentificationResult eval_identification(const std::set<std::string>& pred, const std::set<std::string>& gt) {
    if (pred.empty() && gt.empty()) return {1, 1.0};
    if (pred.empty() || gt.empty()) return {0, 0.0};
    std::size_t shared = 0;
    for (const auto& t : pred) shared += gt.count(t);
    if (shared == 0) return {0, 0.0};
    const double precision = static_cast<double>(shared) / static_cast<double>(pred.size());
    const double recall = static_cast<double>(shared) / static_cast<double>(gt.size());
    return {pred == gt ? 1 : 0, 2.0 * precision * recall / (precision + recall)};
}

CallingResult eval_calling(const std::vector<ToolCall>& pred, const std::vector<ToolCall>& gt) {
    CallingResult out;
    out.tool_acc = token_set(pred) == token_set(gt) ? 1 : 0;

    bool params_ok = true;
    const auto matches = match_calls(pred, gt);
    std::vector<bool> used(pred.size(), false);
    for (std::size_t i = 0; i < gt.size(); ++i) {
        if (!matches[i] || !values_equal(pred[*matches[i]].parameters, gt[i].parameters)) {
            params_ok = false;
            break;
        }
        used[*matches[i]] = true;
    }
    for (std::size_t j = 0; j < pred.size() && params_ok; ++j) {
        if (used[j]) continue;
        bool gt_token = false;
        bool repeats = false;
        for (const auto& g : gt) {
            if (g.token != pred[j].token) continue;
            gt_token = true;
            if (values_equal(g.parameters, pred[j].parameters)) repeats = true;
        }
        if (gt_token && !repeats) params_ok = false;
    }
    out.param_acc = params_ok ? 1 : 0;
    out.em = out.tool_acc && out.param_acc && pred.size() == gt.size() ? 1 : 0;
    return out;
}

std::string_view to_string(TurnScope scope) { return scope == TurnScope::Final ? "final" : "per_step"; }

TurnScope turn_scope_from_string(std::string_view name) {
    if (name == "final") return TurnScope::Final;
    if (name == "per_step") return TurnScope::PerStep;
    throw ValidationError("InvalidTurnScope", "unknown turn scope '" + std::string(name) + "'");
}

Json RecordDetail::to_json() const {
    return Json{{"id", id},           {"missing", missing},   {"ident_em", ident_em},  {"ident_f1", ident_f1},
                {"call_em", call_em}, {"tool_acc", tool_acc}, {"param_acc", param_acc}};
}

namespace {

std::set<std::string> identified_tokens(const Step& step) {
    if (step.has_token_block) return {step.tokens.begin(), step.tokens.end()};
    return token_set(step.calls);
}

RecordDetail score_record(const DatasetRecord& record, const Trajectory& prediction, TurnScope scope) {
    RecordDetail d;
    d.id = record.id;
    const auto pred_steps = extract_steps(prediction);
    const auto gt_steps = record.all_steps();
    const Step empty_step;
    static const std::vector<ToolCall> kNone;

    auto accumulate = [&d](const Step& pred, const std::vector<ToolCall>& gt) {
        const auto ident = eval_identification(identified_tokens(pred), token_set(gt));
        const auto call = eval_calling(pred.calls, gt);
        d.ident_em += ident.em;
        d.ident_f1 += ident.f1;
        d.call_em += call.em;
        d.tool_acc += call.tool_acc;
        d.param_acc += call.param_acc;
    };

    if (scope == TurnScope::Final) {
        accumulate(pred_steps.empty() ? empty_step : pred_steps.back(), gt_steps.empty() ? kNone : gt_steps.back());
        return d;
    }
    const std::size_t n = std::max(pred_steps.size(), gt_steps.size());
    if (n == 0) {
        accumulate(empty_step, kNone);
        return d;
    }
    for (std::size_t i = 0; i < n; ++i) {
        accumulate(i < pred_steps.size() ? pred_steps[i] : empty_step, i < gt_steps.size() ? gt_steps[i] : kNone);
    }
    const double scale = 1.0 / static_cast<double>(n);
    d.ident_em *= scale;
    d.ident_f1 *= scale;
    d.call_em *= scale;
    d.tool_acc *= scale;
    d.param_acc *= scale;
    return d;
}

// Order-independent mean: sort before summing.
double percent_mean(std::vector<double> values) {
    if (values.empty()) return 0.0;
    std::sort(values.begin(), values.end());
    double sum = 0.0;
    for (double v : values) sum += v;
    return 100.0 * sum / static_cast<double>(values.size());
}

}  // namespace

EvalReport evaluate_dataset(const Predictions& predictions, const std::vector<DatasetRecord>& dataset,
                            const ToolRegistry& registry, TurnScope scope) {
    (void)registry;
    for (const auto& [id, prediction] : predictions) {
        if (!find_record(dataset, id)) throw ValidationError("UnknownRecordId", "prediction for unknown record '" + id + "'");
    }
    EvalReport report;
    report.n = dataset.size();
    std::vector<double> em, f1, call_em, tool_acc, param_acc;
    for (const auto& record : dataset) {
        RecordDetail d;
        auto it = predictions.find(record.id);
        if (it == predictions.end() || !it->second) {
            d.id = record.id;
            d.missing = true;
        } else {
            d = score_record(record, *it->second, scope);
        }
        em.push_back(d.ident_em);
        f1.push_back(d.ident_f1);
        call_em.push_back(d.call_em);
        tool_acc.push_back(d.tool_acc);
        param_acc.push_back(d.param_acc);
        report.per_record.push_back(std::move(d));
    }
    report.ident_em = percent_mean(std::move(em));
    report.ident_f1 = percent_mean(std::move(f1));
    report.call_em = percent_mean(std::move(call_em));
    report.tool_acc = percent_mean(std::move(tool_acc));
    report.param_acc = percent_mean(std::move(param_acc));
    return report;
}

namespace {

std::string two_decimals(double v) {
    char buffer[32];
    std::snprintf(buffer, sizeof buffer, "%.2f", v);
    return buffer;
}

}  // namespace

Json EvalReport::to_json() const {
    return Json{{"schema_version", 1},
                {"n", n},
                {"identification", {{"em", ident_em}, {"f1", ident_f1}}},
                {"calling", {{"em", call_em}, {"tool_acc", tool_acc}, {"param_acc", param_acc}}},
                {"display",
                 {{"ident_em", two_decimals(ident_em)},
                  {"ident_f1", two_decimals(ident_f1)},
                  {"call_em", two_decimals(call_em)},
                  {"tool_acc", two_decimals(tool_acc)},
                  {"param_acc", two_decimals(param_acc)}}}};
}

std::string EvalReport::to_table() const {
    char buffer[256];
    std::string out;
    std::snprintf(buffer, sizeof buffer, "%-10s %10s %10s %10s %10s %10s\n", "n", "Ident.EM", "Ident.F1", "Call.EM",
                  "Tool Acc", "Param Acc");
    out += buffer;
    std::snprintf(buffer, sizeof buffer, "%-10zu %10.2f %10.2f %10.2f %10.2f %10.2f\n", n, ident_em, ident_f1, call_em,
                  tool_acc, param_acc);
    out += buffer;
    return out;
}

std::string EvalReport::per_record_jsonl() const {
    std::string out;
    for (const auto& d : per_record) out += compact_dump(d.to_json()) + "\n";
    return out;
}

}  // namespace tinr
