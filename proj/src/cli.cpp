#include "tinr/cli.hpp"

#include "tinr/config.hpp"
#include "tinr/dataconstruct.hpp"
#include "tinr/dataset.hpp"
#include "tinr/driver.hpp"
#include "tinr/error.hpp"
#include "tinr/eval.hpp"
#include "tinr/io.hpp"
#include "tinr/losses.hpp"
#include "tinr/registry.hpp"
#include "tinr/rewards.hpp"
#include "tinr/service.hpp"

#include <CLI11.hpp>

#include <functional>
#include <iostream>
#include <sstream>

namespace tinr {

namespace {

struct Options {
    std::string config_path;
    std::string out_path;
    std::string registry_path;
    std::string dataset_path;
    std::string split;

    // registry
    std::string tools_path;
    std::string strategy;
    std::size_t branching = 0;
    std::string surface;

    // data
    std::optional<std::size_t> k;
    std::optional<std::size_t> retrieved;
    std::optional<std::uint64_t> seed;
    std::string candidates_path;
    std::string input_path;
    std::string rejections_path;

    // phase1 / sft / losses
    std::string pseudo_path;
    std::string examples_path;
    std::string logprobs_path;
    std::optional<double> alpha;
    std::optional<double> beta;

    // score / advantages / eval
    std::string text;
    std::string text_path;
    std::string record_id;
    std::string gt_path;
    std::string mode;
    std::vector<double> rewards;
    std::optional<double> epsilon;
    std::string predictions_path;
    std::string scope = "final";
    std::string per_record_path;
    bool table = false;

    // simulate / serve
    std::string script_path;
    bool oracle = false;
    std::optional<int> port;
    std::string sft_path;
};

class Runner {
public:
    Runner(Options& o, std::ostream& out, std::ostream& err) : o_(o), out_(out), err_(err) {}

    Config config() const {
        if (o_.config_path.empty()) return Config{};
        return load_config(o_.config_path);
    }

    void emit(const std::string& text) const {
        if (o_.out_path.empty()) {
            out_ << text;
            out_.flush();
        } else {
            write_file(o_.out_path, text);
        }
    }

    void emit_json(const Json& json) const { emit(json.dump(2) + "\n"); }

    std::shared_ptr<const ToolRegistry> registry(const Config& c) const {
        std::filesystem::path path = o_.registry_path;
        if (path.empty()) {
            if (c.registry_path.empty()) throw ValidationError("InvalidConfig", "no registry given (--registry or [registry] path)");
            path = c.resolve(c.registry_path);
        }
        return std::make_shared<const ToolRegistry>(ToolRegistry::load(read_file(path)));
    }

    std::vector<DatasetRecord> records(const Config& c, const ToolRegistry& reg) const {
        if (!o_.dataset_path.empty()) return load_dataset(o_.dataset_path, reg);
        if (!o_.split.empty()) return load_dataset(c.dataset_path(o_.split), reg);
        std::vector<DatasetRecord> all;
        for (const auto& [split, path] : c.dataset_paths) {
            auto part = load_dataset(c.resolve(path), reg);
            for (auto& r : part) {
                if (find_record(all, r.id)) throw ValidationError("MalformedDataset", "duplicate record id '" + r.id + "'");
                all.push_back(std::move(r));
            }
        }
        if (all.empty()) throw ValidationError("InvalidConfig", "no dataset given (--dataset, --split or [datasets])");
        return all;
    }

    const DatasetRecord& record(const std::vector<DatasetRecord>& rs) const {
        if (o_.record_id.empty()) throw ValidationError("InvalidArgument", "--record is required");
        const DatasetRecord* r = find_record(rs, o_.record_id);
        if (!r) throw ValidationError("UnknownRecordId", "unknown record '" + o_.record_id + "'");
        return *r;
    }

    // ---------------------------------------------------------------------

    void registry_build() const {
        const Config c = config();
        const std::string text = read_file(o_.tools_path);
        std::vector<ToolDoc> tools;
        const auto first = text.find_first_not_of(" \t\r\n");
        if (first != std::string::npos && text[first] == '[') {
            Json array;
            try {
                array = Json::parse(text);
            } catch (const Json::exception& e) {
                throw ValidationError("InvalidToolDoc", std::string("malformed tools file: ") + e.what());
            }
            for (const auto& t : array) tools.push_back(ToolDoc::from_json(t));
        } else {
            for (const auto& line : parse_jsonl(text)) tools.push_back(ToolDoc::from_json(line.value));
        }
        const IndexStrategy strategy = o_.strategy.empty() ? c.strategy : strategy_from_string(o_.strategy);
        const std::size_t branching = o_.branching ? o_.branching : c.branching;
        const auto reg = ToolRegistry::build(std::move(tools), strategy, branching);
        emit(reg.serialize());
        err_ << compact_dump(Json{{"built", reg.size()}, {"strategy", to_string(strategy)}}) << "\n";
    }

    void registry_inspect() const {
        const Config c = config();
        const auto reg = registry(c);
        if (!o_.surface.empty()) {
            const auto hit = reg->resolve(o_.surface);
            if (!hit) throw ValidationError("UnknownToolToken", "no tool with surface '" + o_.surface + "'");
            emit_json(Json{{"schema_version", 1}, {"surface", hit->token->surface}, {"doc", hit->doc->to_json()}});
            return;
        }
        Json tokens = Json::array();
        for (std::size_t i = 0; i < reg->size(); ++i) tokens.push_back({{"surface", reg->token(i).surface}, {"name", reg->tool(i).name}});
        emit_json(Json{{"schema_version", 1},
                       {"strategy", to_string(reg->strategy())},
                       {"branching", reg->branching()},
                       {"size", reg->size()},
                       {"tokens", tokens}});
    }

    void data_candidates() const {
        const Config c = config();
        const auto reg = registry(c);
        const auto rs = records(c, *reg);
        const std::size_t k = o_.k.value_or(c.dataconstruct.k);
        const std::size_t retrieved = o_.retrieved.value_or(c.dataconstruct.retrieved_count);
        const std::uint64_t seed = o_.seed.value_or(c.dataconstruct.seed);
        const Bm25Retriever retriever(*reg);
        std::string out;
        for (const auto& r : rs) {
            if (!r.in_domain()) continue;
            out += compact_dump(sample_candidates(r, *reg, k, retrieved, seed, retriever).to_json(*reg)) + "\n";
        }
        emit(out);
    }

    // Candidates: JSONL of {"record_id", "trajectory"}. Accepted ones are
    // written as SFT records with tool names replaced by surfaces.
    void data_filter() const {
        const Config c = config();
        const auto reg = registry(c);
        const auto rs = records(c, *reg);
        std::map<std::string, std::vector<std::string>> by_record;
        std::vector<std::string> order;
        for (const auto& line : read_jsonl(o_.candidates_path)) {
            const auto& v = line.value;
            if (!v.is_object() || !v.contains("record_id") || !v.contains("trajectory")) {
                throw ValidationError("MalformedJsonl", "line " + std::to_string(line.line_number) +
                                                            ": need \"record_id\" and \"trajectory\"");
            }
            const auto id = v.at("record_id").get<std::string>();
            if (!by_record.count(id)) order.push_back(id);
            by_record[id].push_back(v.at("trajectory").get<std::string>());
        }
        std::string accepted;
        std::string rejected;
        std::size_t n_accepted = 0;
        std::size_t n_rejected = 0;
        for (const auto& id : order) {
            const DatasetRecord* r = find_record(rs, id);
            if (!r) throw ValidationError("UnknownRecordId", "candidate for unknown record '" + id + "'");
            const auto result = reject_filter(by_record[id], *r, *reg);
            for (std::size_t i = 0; i < result.accepted.size(); ++i) {
                const Trajectory formatted = format_trajectory(result.accepted[i], *reg);
                accepted += compact_dump(SftRecord{id, r->instruction, serialize(formatted)}.to_json()) + "\n";
            }
            for (const auto& rej : result.rejections) {
                rejected += compact_dump(Json{{"record_id", id}, {"candidate", rej.candidate}, {"reason", rej.reason}}) + "\n";
            }
            n_accepted += result.accepted.size();
            n_rejected += result.rejections.size();
        }
        emit(accepted);
        if (!o_.rejections_path.empty()) write_file(o_.rejections_path, rejected);
        err_ << compact_dump(Json{{"accepted", n_accepted}, {"rejected", n_rejected}}) << "\n";
    }

    // Input: JSONL of {"record_id", "instruction"?, "trajectory"} with raw tool names.
    void data_format() const {
        const Config c = config();
        const auto reg = registry(c);
        std::string out;
        for (const auto& line : read_jsonl(o_.input_path)) {
            SftRecord r = SftRecord::from_json(line.value);
            r.trajectory_text = serialize(format_trajectory(parse(r.trajectory_text), *reg));
            out += compact_dump(r.to_json()) + "\n";
        }
        emit(out);
    }

    void phase1_examples() const {
        const Config c = config();
        const auto reg = registry(c);
        std::vector<DatasetRecord> rs;
        for (auto& r : records(c, *reg)) {
            if (r.in_domain()) rs.push_back(std::move(r));
        }
        if (!o_.pseudo_path.empty()) {
            for (auto& r : load_dataset(o_.pseudo_path, *reg)) rs.push_back(std::move(r));
        }
        std::vector<Json> lines;
        for (const auto& e : build_phase1_examples(*reg, rs)) lines.push_back(e.to_json());
        emit(to_jsonl(lines));
    }

    void sft_examples() const {
        const Config c = config();
        const auto reg = registry(c);
        std::vector<SftRecord> rs;
        for (const auto& line : read_jsonl(o_.input_path)) rs.push_back(SftRecord::from_json(line.value));
        std::vector<Json> lines;
        for (const auto& e : build_sft_examples(rs, *reg)) lines.push_back(e.to_json());
        emit(to_jsonl(lines));
    }

    // Examples JSONL plus logprobs as [{"example_id", "logprobs"}].
    void losses() const {
        const Config c = config();
        std::vector<TrainingExample> examples;
        for (const auto& line : read_jsonl(o_.examples_path)) examples.push_back(TrainingExample::from_json(line.value));
        Json messages;
        try {
            messages = Json::parse(read_file(o_.logprobs_path));
        } catch (const Json::exception& e) {
            throw ValidationError("MalformedLogprobs", e.what());
        }
        const auto report =
            aggregate_losses(examples, messages, o_.alpha.value_or(c.losses.alpha), o_.beta.value_or(c.losses.beta));
        emit_json(report.to_json());
    }

    void score_cmd() const {
        const Config c = config();
        const auto reg = registry(c);
        std::string text = o_.text;
        if (!o_.text_path.empty()) text = read_file(o_.text_path);
        StepCalls steps;
        if (!o_.gt_path.empty()) {
            Json gt;
            try {
                gt = Json::parse(read_file(o_.gt_path));
            } catch (const Json::exception& e) {
                throw ValidationError("MalformedDataset", std::string("malformed ground truth: ") + e.what());
            }
            Json wrapped = {{"id", "gt"}, {"split", "train"}, {"turns", Json::array({{{"steps", gt}}})}};
            if (!gt.empty() && gt.front().is_object()) wrapped["turns"][0]["steps"] = Json::array({gt});
            steps = record_from_json(wrapped, *reg).all_steps();
        } else {
            steps = record(records(c, *reg)).all_steps();
        }
        const ScoringMode mode = o_.mode.empty() ? c.reward.multi_step_scoring : scoring_mode_from_string(o_.mode);
        emit_json(score(text, steps, *reg, mode).to_json());
    }

    void advantages_cmd() const {
        const Config c = config();
        std::vector<double> rewards = o_.rewards;
        if (!o_.input_path.empty()) {
            try {
                rewards = Json::parse(read_file(o_.input_path)).get<std::vector<double>>();
            } catch (const Json::exception& e) {
                throw ValidationError("NonFiniteInput", std::string("rewards file must be a JSON array of numbers: ") + e.what());
            }
        }
        emit_json(group_advantages(rewards, o_.epsilon.value_or(c.reward.epsilon)).to_json());
    }

    // Predictions: JSONL of {"record_id", "trajectory": string | null}.
    void eval_cmd() const {
        const Config c = config();
        const auto reg = registry(c);
        const auto rs = records(c, *reg);
        Predictions predictions;
        for (const auto& line : read_jsonl(o_.predictions_path)) {
            const auto& v = line.value;
            if (!v.is_object() || !v.contains("record_id")) {
                throw ValidationError("MalformedJsonl", "line " + std::to_string(line.line_number) + ": need \"record_id\"");
            }
            const auto id = v.at("record_id").get<std::string>();
            std::optional<Trajectory> t;
            if (v.contains("trajectory") && v.at("trajectory").is_string()) {
                try {
                    t = parse(v.at("trajectory").get<std::string>());
                } catch (const ParseError& e) {
                    err_ << compact_dump(Json{{"warning", "UnparseablePrediction"}, {"record_id", id}, {"message", e.what()}}) << "\n";
                }
            }
            predictions[id] = std::move(t);
        }
        const auto report = evaluate_dataset(predictions, rs, *reg, turn_scope_from_string(o_.scope));
        if (!o_.per_record_path.empty()) write_file(o_.per_record_path, report.per_record_jsonl());
        if (o_.table) {
            emit(report.to_table());
        } else {
            emit_json(report.to_json());
        }
    }

    void simulate() const {
        const Config c = config();
        const auto reg = registry(c);
        const auto rs = records(c, *reg);
        const DatasetRecord& r = record(rs);
        std::vector<std::string> script;
        if (o_.oracle) {
            script = oracle_script(r);
        } else {
            try {
                script = Json::parse(read_file(o_.script_path)).get<std::vector<std::string>>();
            } catch (const Json::exception& e) {
                throw ValidationError("MalformedScript", std::string("script must be a JSON array of strings: ") + e.what());
            }
        }
        ScriptedPolicy policy(std::move(script));
        CannedExecutor executor(r);
        Session session{"simulate-" + r.id, reg, {}, 0, c.budget()};
        const Trajectory t = run_record(session, r, policy, executor);
        emit_json(Json{{"schema_version", 1},
                       {"record_id", r.id},
                       {"trajectory", serialize(t)},
                       {"format_ok", check_format(serialize(t))},
                       {"policy_calls", policy.requests().size()}});
    }

    void serve() const {
        Config c = config();
        if (o_.port) c.service.port = *o_.port;
        const auto reg = registry(c);
        std::vector<DatasetRecord> rs;
        if (!o_.dataset_path.empty() || !o_.split.empty() || !c.dataset_paths.empty()) rs = records(c, *reg);
        std::vector<SftRecord> sft;
        if (!o_.sft_path.empty()) {
            for (const auto& line : read_jsonl(o_.sft_path)) sft.push_back(SftRecord::from_json(line.value));
        }
        Service service(c, reg, std::move(rs), std::move(sft));
        const int port = service.bind();
        err_ << compact_dump(Json{{"listening", c.service.bind_address}, {"port", port}}) << "\n";
        err_.flush();
        service.listen();
    }

private:
    Options& o_;
    std::ostream& out_;
    std::ostream& err_;
};

void diagnose(std::ostream& err, const std::string& command, const std::string& kind, const std::string& message) {
    err << compact_dump(Json{{"command", command}, {"error", kind}, {"message", message}}) << "\n";
}

}  // namespace

int cli(int argc, const char* const argv[], std::ostream& out, std::ostream& err) {
    Options o;
    Runner run(o, out, err);
    CLI::App app{"Tool-internalized reasoning harness"};
    app.name("tinr");
    app.require_subcommand(1);
    app.add_option("--config", o.config_path, "INI or JSON configuration file");

    std::function<void()> action;
    std::string command;
    auto bind = [&](CLI::App* sub, std::string name, void (Runner::*fn)() const) {
        sub->callback([&action, &command, &run, name, fn] {
            command = name;
            action = [&run, fn] { (run.*fn)(); };
        });
    };
    auto add_out = [&o](CLI::App* sub) { sub->add_option("-o,--out", o.out_path, "Output file (default stdout)"); };
    auto add_registry = [&o](CLI::App* sub) { sub->add_option("--registry", o.registry_path, "Registry file"); };
    auto add_data = [&o](CLI::App* sub) {
        sub->add_option("--dataset", o.dataset_path, "Dataset JSONL");
        sub->add_option("--split", o.split, "Configured split to load");
    };

    auto* reg = app.add_subcommand("registry", "Build or inspect a tool registry");
    reg->require_subcommand(1);
    auto* reg_build = reg->add_subcommand("build", "Assign tool tokens and write a registry file");
    reg_build->add_option("--tools", o.tools_path, "Tool documentation (JSON array or JSONL)")->required();
    reg_build->add_option("--strategy", o.strategy, "atomic | semantic | numeric | hierarchical");
    reg_build->add_option("--branching", o.branching, "Cluster branching factor");
    add_out(reg_build);
    bind(reg_build, "registry build", &Runner::registry_build);
    auto* reg_inspect = reg->add_subcommand("inspect", "Summarize a registry or show one tool");
    add_registry(reg_inspect);
    reg_inspect->add_option("--surface", o.surface, "Show the documentation of one token");
    add_out(reg_inspect);
    bind(reg_inspect, "registry inspect", &Runner::registry_inspect);

    auto* data = app.add_subcommand("data", "Training data construction");
    data->require_subcommand(1);
    auto* cand = data->add_subcommand("candidates", "Sample candidate tool sets per record");
    add_registry(cand);
    add_data(cand);
    cand->add_option("--k", o.k, "Candidate set size");
    cand->add_option("--retrieved", o.retrieved, "Lexically retrieved tools per set");
    cand->add_option("--seed", o.seed, "Sampling seed");
    add_out(cand);
    bind(cand, "data candidates", &Runner::data_candidates);
    auto* filt = data->add_subcommand("filter", "Keep synthesized trajectories that match ground truth");
    add_registry(filt);
    add_data(filt);
    filt->add_option("--candidates", o.candidates_path, "JSONL of {record_id, trajectory}")->required();
    filt->add_option("--rejections", o.rejections_path, "Write rejection reasons here");
    add_out(filt);
    bind(filt, "data filter", &Runner::data_filter);
    auto* fmt = data->add_subcommand("format", "Replace tool names with token surfaces");
    add_registry(fmt);
    fmt->add_option("--input", o.input_path, "JSONL of {record_id, instruction, trajectory}")->required();
    add_out(fmt);
    bind(fmt, "data format", &Runner::data_format);

    auto* p1 = app.add_subcommand("phase1", "Knowledge alignment examples");
    p1->require_subcommand(1);
    auto* p1_ex = p1->add_subcommand("examples", "Memorization, recall and usage examples");
    add_registry(p1_ex);
    add_data(p1_ex);
    p1_ex->add_option("--pseudo", o.pseudo_path, "Extra usage records (dataset JSONL)");
    add_out(p1_ex);
    bind(p1_ex, "phase1 examples", &Runner::phase1_examples);

    auto* sft = app.add_subcommand("sft", "Supervised fine-tuning examples");
    sft->require_subcommand(1);
    auto* sft_ex = sft->add_subcommand("examples", "Context/target pairs from formatted trajectories");
    add_registry(sft_ex);
    sft_ex->add_option("--input", o.input_path, "JSONL of {record_id, instruction, trajectory}")->required();
    add_out(sft_ex);
    bind(sft_ex, "sft examples", &Runner::sft_examples);

    auto* loss = app.add_subcommand("losses", "Aggregate target log-probabilities into phase losses");
    loss->add_option("--examples", o.examples_path, "Examples JSONL")->required();
    loss->add_option("--logprobs", o.logprobs_path, "JSON array of {example_id, logprobs}")->required();
    loss->add_option("--alpha", o.alpha, "Recall weight");
    loss->add_option("--beta", o.beta, "Usage weight");
    add_out(loss);
    bind(loss, "losses", &Runner::losses);

    auto* sc = app.add_subcommand("score", "Reward breakdown of one policy output");
    add_registry(sc);
    add_data(sc);
    auto* text_opt = sc->add_option("--text", o.text, "Policy output");
    sc->add_option("--text-file", o.text_path, "Read the policy output from a file")->excludes(text_opt);
    sc->add_option("--record", o.record_id, "Ground truth from this dataset record");
    sc->add_option("--gt", o.gt_path, "Ground truth JSON: calls or steps of calls");
    sc->add_option("--mode", o.mode, "final | per_step");
    add_out(sc);
    bind(sc, "score", &Runner::score_cmd);

    auto* adv = app.add_subcommand("advantages", "Group-standardized advantages");
    auto* rewards_opt = adv->add_option("--rewards", o.rewards, "Rewards of one group")->delimiter(',');
    adv->add_option("--input", o.input_path, "JSON array of rewards")->excludes(rewards_opt);
    adv->add_option("--epsilon", o.epsilon, "Clip range reported with the group");
    add_out(adv);
    bind(adv, "advantages", &Runner::advantages_cmd);

    auto* ev = app.add_subcommand("eval", "Identification and calling metrics");
    add_registry(ev);
    add_data(ev);
    ev->add_option("--predictions", o.predictions_path, "JSONL of {record_id, trajectory}")->required();
    ev->add_option("--scope", o.scope, "final | per_step");
    ev->add_option("--per-record", o.per_record_path, "Write per-record scores here");
    ev->add_flag("--table", o.table, "Print a text table instead of JSON");
    add_out(ev);
    bind(ev, "eval", &Runner::eval_cmd);

    auto* sim = app.add_subcommand("simulate", "Drive the two-step loop with a scripted policy");
    add_registry(sim);
    add_data(sim);
    sim->add_option("--record", o.record_id, "Record to run")->required();
    auto* script_opt = sim->add_option("--script", o.script_path, "JSON array of policy responses");
    sim->add_flag("--oracle", o.oracle, "Replay the record's ground truth")->excludes(script_opt);
    add_out(sim);
    bind(sim, "simulate", &Runner::simulate);

    auto* srv = app.add_subcommand("serve", "Run the HTTP scoring service");
    add_registry(srv);
    add_data(srv);
    srv->add_option("--port", o.port, "Override [service] port");
    srv->add_option("--sft", o.sft_path, "SFT records backing examples_ref=sft");
    bind(srv, "serve", &Runner::serve);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        diagnose(err, command.empty() ? "tinr" : command, "UsageError", e.what());
        return 1;
    }

    if (!action) {
        diagnose(err, "tinr", "UsageError", "no subcommand given");
        return 1;
    }
    if (command == "simulate" && !o.oracle && o.script_path.empty()) {
        diagnose(err, command, "UsageError", "simulate needs --script or --oracle");
        return 1;
    }
    try {
        action();
        return 0;
    } catch (const IoError& e) {
        diagnose(err, command, e.kind(), e.what());
        return 2;
    } catch (const Error& e) {
        diagnose(err, command, e.kind(), e.what());
        return 1;
    } catch (const Json::exception& e) {
        diagnose(err, command, "MalformedInput", e.what());
        return 1;
    }
}

int cli(int argc, const char* const argv[]) { return cli(argc, argv, std::cout, std::cerr); }

}  // namespace tinr
