#pragma once

#include "tinr/config.hpp"
#include "tinr/dataset.hpp"
#include "tinr/driver.hpp"
#include "tinr/losses.hpp"
#include "tinr/registry.hpp"

#include <atomic>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace httplib {
class Server;
}

namespace tinr {

// HTTP front end for scoring, advantages, loss aggregation, tool lookup and
// driver sessions. Every response is a JSON object carrying schema_version.
//
//   POST /score                 {"text", "record_id" | "gt", "mode"?}
//   POST /advantages            {"rewards", "epsilon"?}
//   POST /losses                {"examples_ref": "phase1" | "sft", "logprobs", "alpha"?, "beta"?}
//   GET  /tools/{surface}
//   POST /session               {"user_text"?, "record_id"?, "want_logprobs"?}
//   POST /session/{id}/step     PolicyResponse
//   GET  /health
//
// "gt" is either a list of calls (one step) or a list of steps.
class Service {
public:
    struct Reply {
        int status = 200;
        Json body;
    };

    Service(Config config, std::shared_ptr<const ToolRegistry> registry, std::vector<DatasetRecord> records,
            std::vector<SftRecord> sft_records = {});
    ~Service();

    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    // Socket-free entry point; the HTTP server forwards every request here.
    Reply handle(const std::string& method, const std::string& path, const std::string& body);

    // Binds config.service.bind_address; port 0 picks a free port.
    // Returns the bound port.
    int bind();
    void listen();  // blocks until stop()
    void stop();

    std::size_t in_flight() const { return in_flight_.load(); }

private:
    struct SessionSlot;

    Reply score(const Json& body) const;
    Reply advantages(const Json& body) const;
    Reply losses(const Json& body) const;
    Reply tool(const std::string& surface) const;
    Reply open_session(const Json& body);
    Reply step_session(const std::string& id, const Json& body);

    const DatasetRecord* record(const std::string& id) const;

    Config config_;
    std::shared_ptr<const ToolRegistry> registry_;
    std::vector<DatasetRecord> records_;
    std::map<std::string, std::size_t> record_index_;
    std::vector<TrainingExample> phase1_;
    std::string phase1_error_;
    std::vector<TrainingExample> sft_;
    std::string sft_error_;

    std::mutex sessions_mutex_;
    std::map<std::string, std::shared_ptr<SessionSlot>> sessions_;
    std::uint64_t next_session_ = 1;

    std::atomic<std::size_t> in_flight_{0};
    std::unique_ptr<httplib::Server> server_;
};

}  // namespace tinr
