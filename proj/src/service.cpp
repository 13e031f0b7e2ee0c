#include "tinr/service.hpp"

#include "tinr/error.hpp"
#include "tinr/rewards.hpp"

#include <httplib.h>

#include <cmath>
#include <stdexcept>

namespace tinr {

namespace {

constexpr int kSchemaVersion = 1;

Service::Reply reply(int status, Json body) {
    body["schema_version"] = kSchemaVersion;
    return {status, std::move(body)};
}

Service::Reply error_reply(int status, const std::string& kind, const std::string& message) {
    return reply(status, Json{{"error", kind}, {"message", message}});
}

Service::Reply from_error(const Error& e) {
    if (e.kind() == "IoError") return error_reply(500, e.kind(), e.what());
    return error_reply(400, e.kind(), e.what());
}

ValidationError schema(const std::string& why) { return ValidationError("SchemaViolation", why); }

ToolCall gt_call(const Json& json, const ToolRegistry& registry) {
    if (!json.is_object()) throw schema("ground-truth call must be an object");
    std::string reference;
    if (json.contains("token") && json.at("token").is_string()) {
        reference = json.at("token").get<std::string>();
    } else if (json.contains("name") && json.at("name").is_string()) {
        reference = json.at("name").get<std::string>();
    } else {
        throw schema("ground-truth call needs a string \"token\" or \"name\"");
    }
    Json params = json.value("parameters", Json::object());
    if (!params.is_object()) throw schema("\"parameters\" must be an object");
    return ToolCall{registry.normalize_reference(reference).value_or(reference), std::move(params)};
}

StepCalls gt_steps(const Json& json, const ToolRegistry& registry) {
    if (!json.is_array()) throw schema("\"gt\" must be an array");
    StepCalls steps;
    if (!json.empty() && json.front().is_object()) {
        std::vector<ToolCall> step;
        for (const auto& c : json) step.push_back(gt_call(c, registry));
        steps.push_back(std::move(step));
        return steps;
    }
    for (const auto& step_json : json) {
        if (!step_json.is_array()) throw schema("each ground-truth step must be an array of calls");
        std::vector<ToolCall> step;
        for (const auto& c : step_json) step.push_back(gt_call(c, registry));
        steps.push_back(std::move(step));
    }
    return steps;
}

double real_field(const Json& body, const char* key, double fallback) {
    if (!body.contains(key)) return fallback;
    const auto& v = body.at(key);
    if (!v.is_number()) throw schema(std::string("\"") + key + "\" must be a number");
    return v.get<double>();
}

// Holds one in-flight slot for the duration of a request.
class Admission {
public:
    Admission(std::atomic<std::size_t>& counter, std::size_t limit) : counter_(counter) {
        admitted_ = counter_.fetch_add(1) < limit;
    }
    ~Admission() { counter_.fetch_sub(1); }
    bool admitted() const { return admitted_; }

private:
    std::atomic<std::size_t>& counter_;
    bool admitted_;
};

}  // namespace

struct Service::SessionSlot {
    std::mutex mutex;
    Session session;
    std::unique_ptr<TurnDriver> driver;
    std::unique_ptr<Executor> executor;
};

Service::Service(Config config, std::shared_ptr<const ToolRegistry> registry, std::vector<DatasetRecord> records,
                 std::vector<SftRecord> sft_records)
    : config_(std::move(config)), registry_(std::move(registry)), records_(std::move(records)) {
    if (!registry_) throw ValidationError("InvalidArgument", "service needs a registry");
    for (std::size_t i = 0; i < records_.size(); ++i) {
        if (!record_index_.emplace(records_[i].id, i).second) {
            throw ValidationError("MalformedDataset", "duplicate record id '" + records_[i].id + "'");
        }
    }
    std::vector<DatasetRecord> usage;
    for (const auto& r : records_) {
        if (r.in_domain()) usage.push_back(r);
    }
    try {
        phase1_ = build_phase1_examples(*registry_, usage);
    } catch (const Error& e) {
        phase1_error_ = e.what();
    }
    try {
        sft_ = build_sft_examples(sft_records, *registry_);
    } catch (const Error& e) {
        sft_error_ = e.what();
    }
}

Service::~Service() { stop(); }

const DatasetRecord* Service::record(const std::string& id) const {
    auto it = record_index_.find(id);
    return it == record_index_.end() ? nullptr : &records_[it->second];
}

Service::Reply Service::handle(const std::string& method, const std::string& path, const std::string& body) {
    Admission admission(in_flight_, config_.service.max_concurrent);
    if (!admission.admitted()) return error_reply(503, "OverCapacity", "too many concurrent requests");

    try {
        if (method == "GET") {
            if (path == "/health") return reply(200, Json{{"status", "ok"}, {"tools", registry_->size()}});
            if (path.rfind("/tools/", 0) == 0) return tool(path.substr(7));
            return error_reply(404, "NotFound", "no route for GET " + path);
        }
        if (method != "POST") return error_reply(405, "MethodNotAllowed", method + " is not supported");

        Json json;
        try {
            json = Json::parse(body);
        } catch (const Json::exception& e) {
            return error_reply(400, "MalformedJson", e.what());
        }
        if (!json.is_object()) return error_reply(400, "SchemaViolation", "request body must be a JSON object");

        if (path == "/score") return score(json);
        if (path == "/advantages") return advantages(json);
        if (path == "/losses") return losses(json);
        if (path == "/session") return open_session(json);
        const std::string prefix = "/session/";
        const std::string suffix = "/step";
        if (path.size() > prefix.size() + suffix.size() && path.rfind(prefix, 0) == 0 &&
            path.compare(path.size() - suffix.size(), suffix.size(), suffix) == 0) {
            return step_session(path.substr(prefix.size(), path.size() - prefix.size() - suffix.size()), json);
        }
        return error_reply(404, "NotFound", "no route for POST " + path);
    } catch (const Error& e) {
        return from_error(e);
    } catch (const Json::exception& e) {
        return error_reply(400, "SchemaViolation", e.what());
    } catch (const std::exception& e) {
        return error_reply(500, "InternalError", e.what());
    }
}

Service::Reply Service::score(const Json& body) const {
    if (!body.contains("text") || !body.at("text").is_string()) throw schema("\"text\" must be a string");
    ScoringMode mode = config_.reward.multi_step_scoring;
    if (body.contains("mode")) mode = scoring_mode_from_string(body.at("mode").get<std::string>());

    StepCalls steps;
    if (body.contains("record_id")) {
        const auto id = body.at("record_id").get<std::string>();
        const DatasetRecord* r = record(id);
        if (!r) return error_reply(404, "UnknownRecordId", "unknown record '" + id + "'");
        steps = r->all_steps();
    } else if (body.contains("gt")) {
        steps = gt_steps(body.at("gt"), *registry_);
    } else {
        throw schema("need \"record_id\" or \"gt\"");
    }
    return reply(200, tinr::score(body.at("text").get<std::string>(), steps, *registry_, mode).to_json());
}

Service::Reply Service::advantages(const Json& body) const {
    if (!body.contains("rewards") || !body.at("rewards").is_array()) throw schema("\"rewards\" must be an array");
    const auto rewards = body.at("rewards").get<std::vector<double>>();
    const double epsilon = real_field(body, "epsilon", config_.reward.epsilon);
    return reply(200, group_advantages(rewards, epsilon).to_json());
}

Service::Reply Service::losses(const Json& body) const {
    const auto ref = body.at("examples_ref").get<std::string>();
    const std::vector<TrainingExample>* examples = nullptr;
    if (ref == "phase1") {
        if (!phase1_error_.empty()) return error_reply(400, "ExamplesUnavailable", phase1_error_);
        examples = &phase1_;
    } else if (ref == "sft") {
        if (!sft_error_.empty()) return error_reply(400, "ExamplesUnavailable", sft_error_);
        examples = &sft_;
    } else {
        throw schema("\"examples_ref\" must be \"phase1\" or \"sft\"");
    }
    const double alpha = real_field(body, "alpha", config_.losses.alpha);
    const double beta = real_field(body, "beta", config_.losses.beta);
    if (!body.contains("logprobs")) throw schema("missing \"logprobs\"");
    try {
        return reply(200, aggregate_losses(*examples, body.at("logprobs"), alpha, beta).to_json());
    } catch (const ValidationError& e) {
        if (e.kind() == "UnknownExample") return error_reply(404, e.kind(), e.what());
        throw;
    }
}

Service::Reply Service::tool(const std::string& surface) const {
    const auto hit = registry_->resolve(surface);
    if (!hit) return error_reply(404, "UnknownToolToken", "no tool with surface '" + surface + "'");
    return reply(200, Json{{"surface", hit->token->surface}, {"tool_index", hit->token->tool_index}, {"doc", hit->doc->to_json()}});
}

Service::Reply Service::open_session(const Json& body) {
    auto slot = std::make_shared<SessionSlot>();
    std::string user_text = body.value("user_text", std::string{});
    if (body.contains("record_id")) {
        const auto id = body.at("record_id").get<std::string>();
        const DatasetRecord* r = record(id);
        if (!r) return error_reply(404, "UnknownRecordId", "unknown record '" + id + "'");
        if (user_text.empty()) user_text = r->instruction;
        slot->executor = std::make_unique<CannedExecutor>(*r);
    } else {
        slot->executor = std::make_unique<CannedExecutor>(DatasetRecord{});
    }
    if (user_text.empty()) throw schema("need \"user_text\" or \"record_id\"");

    {
        std::lock_guard lock(sessions_mutex_);
        slot->session.id = "session-" + std::to_string(next_session_++);
    }
    slot->session.registry = registry_;
    slot->session.budget = config_.budget();
    slot->driver = std::make_unique<TurnDriver>(slot->session, user_text);
    slot->driver->set_want_logprobs(body.value("want_logprobs", false));
    Json out = {{"session_id", slot->session.id}, {"done", false}, {"request", slot->driver->next_request().to_json()}};
    {
        std::lock_guard lock(sessions_mutex_);
        sessions_.emplace(slot->session.id, slot);
    }
    return reply(200, std::move(out));
}

Service::Reply Service::step_session(const std::string& id, const Json& body) {
    std::shared_ptr<SessionSlot> slot;
    {
        std::lock_guard lock(sessions_mutex_);
        auto it = sessions_.find(id);
        if (it == sessions_.end()) return error_reply(404, "UnknownSession", "unknown session '" + id + "'");
        slot = it->second;
    }
    std::lock_guard lock(slot->mutex);
    auto forget = [this, &id] {
        std::lock_guard map_lock(sessions_mutex_);
        sessions_.erase(id);
    };
    if (!slot->driver) return error_reply(404, "UnknownSession", "session '" + id + "' is closed");

    PolicyResponse response;
    try {
        response = PolicyResponse::from_json(body);
    } catch (const ValidationError& e) {
        return error_reply(400, "SchemaViolation", e.what());
    }
    try {
        slot->driver->feed(std::move(response), *slot->executor);
    } catch (const Error& e) {
        slot->driver.reset();
        forget();
        return error_reply(400, e.kind(), e.what());
    }
    if (!slot->driver->done()) {
        return reply(200, Json{{"session_id", id}, {"done", false}, {"request", slot->driver->next_request().to_json()}});
    }
    const std::string trajectory = serialize(slot->session.trajectory_so_far);
    slot->driver.reset();
    forget();
    return reply(200, Json{{"session_id", id}, {"done", true}, {"trajectory", trajectory}});
}

int Service::bind() {
    server_ = std::make_unique<httplib::Server>();
    const std::size_t threads = config_.service.max_concurrent + 4;
    server_->new_task_queue = [threads] { return new httplib::ThreadPool(threads); };
    auto forward = [this](const httplib::Request& req, httplib::Response& res) {
        const Reply r = handle(req.method, req.path, req.body);
        res.status = r.status;
        res.set_content(compact_dump(r.body), "application/json");
    };
    server_->Get(".*", forward);
    server_->Post(".*", forward);
    server_->Put(".*", forward);
    server_->Delete(".*", forward);

    int port = config_.service.port;
    if (port == 0) {
        port = server_->bind_to_any_port(config_.service.bind_address);
    } else if (!server_->bind_to_port(config_.service.bind_address, port)) {
        port = -1;
    }
    if (port < 0) {
        throw IoError("cannot bind " + config_.service.bind_address + ":" + std::to_string(config_.service.port));
    }
    return port;
}

void Service::listen() {
    if (!server_) bind();
    server_->listen_after_bind();
}

void Service::stop() {
    if (server_) server_->stop();
}

}  // namespace tinr
