#include <doctest.h>

#include "fixture.hpp"
#include "tinr/service.hpp"

#include <httplib.h>

#include <thread>

using namespace tinr;

namespace {

struct Fixture {
    std::shared_ptr<const ToolRegistry> registry = testing::fixture_registry();
    std::vector<DatasetRecord> records = testing::fixture_records(*registry, 6, testing::one_to_three, 12);

    std::unique_ptr<Service> make(Config config = {}) {
        std::vector<SftRecord> sft;
        for (const auto& r : records) sft.push_back({r.id, r.instruction, testing::oracle_text(r, *registry)});
        return std::make_unique<Service>(config, registry, records, sft);
    }
};

Json post(Service& s, const std::string& path, const Json& body, int expected = 200) {
    const auto r = s.handle("POST", path, body.dump());
    CHECK_MESSAGE(r.status == expected, r.body.dump());
    CHECK(r.body.at("schema_version") == 1);
    return r.body;
}

}  // namespace

TEST_CASE("health and tool lookup") {
    Fixture f;
    auto s = f.make();
    auto r = s->handle("GET", "/health", "");
    CHECK(r.status == 200);
    CHECK(r.body.at("tools") == 60);
    r = s->handle("GET", "/tools/<<get_weather>>", "");
    CHECK(r.status == 200);
    CHECK(r.body.at("doc").at("name") == "getWeather");
    r = s->handle("GET", "/tools/<<nothing>>", "");
    CHECK(r.status == 404);
    CHECK(r.body.at("error") == "UnknownToolToken");
    CHECK(s->handle("GET", "/nope", "").status == 404);
    CHECK(s->handle("PATCH", "/score", "{}").status == 405);
}

TEST_CASE("score matches the in-process reward") {
    Fixture f;
    auto s = f.make();
    const auto& rec = f.records[2];
    const std::string text = testing::oracle_text(rec, *f.registry);
    const Json body = post(*s, "/score", {{"text", text}, {"record_id", rec.id}});
    CHECK(body == score(text, rec.all_steps(), *f.registry).to_json());
    CHECK(body.at("total") == 3.0);

    // gt given inline, by raw tool name, as one step
    Json gt = Json::array();
    const auto steps = rec.all_steps();
    for (const auto& c : steps[0]) gt.push_back({{"name", f.registry->resolve(c.token)->doc->name}, {"parameters", c.parameters}});
    CHECK(post(*s, "/score", {{"text", text}, {"gt", gt}}).at("total") == 3.0);
    // or as a list of steps
    CHECK(post(*s, "/score", {{"text", text}, {"gt", Json::array({gt})}, {"mode", "per_step"}}).at("total") == 3.0);

    CHECK(post(*s, "/score", {{"text", text}, {"record_id", "missing"}}, 404).at("error") == "UnknownRecordId");
    CHECK(post(*s, "/score", {{"record_id", rec.id}}, 400).at("error") == "SchemaViolation");
    CHECK(post(*s, "/score", {{"text", "x"}, {"record_id", rec.id}, {"mode", "odd"}}, 400).at("error") == "InvalidScoringMode");
    const auto bad = s->handle("POST", "/score", "{not json");
    CHECK(bad.status == 400);
    CHECK(bad.body.at("error") == "MalformedJson");
}

TEST_CASE("advantages and losses") {
    Fixture f;
    auto s = f.make();
    const Json adv = post(*s, "/advantages", {{"rewards", {1.0, 3.0}}});
    CHECK(adv.at("advantages") == Json::array({-1.0, 1.0}));
    CHECK(post(*s, "/advantages", {{"rewards", {1.0}}}, 400).at("error") == "GroupTooSmall");

    const Json lp = Json::array({{{"example_id", "memorization:0"}, {"logprobs", {-1.0, -1.0}}},
                                 {{"example_id", "usage:" + f.records[0].id}, {"logprobs", {-0.5}}}});
    const Json loss = post(*s, "/losses", {{"examples_ref", "phase1"}, {"logprobs", lp}, {"beta", 2.0}});
    CHECK(loss.at("memorization") == 2.0);
    CHECK(loss.at("usage") == 0.5);
    CHECK(loss.at("phase1_total") == 3.0);

    const Json sft_lp = Json::array({{{"example_id", "sft:" + f.records[1].id}, {"logprobs", {-2.0}}}});
    CHECK(post(*s, "/losses", {{"examples_ref", "sft"}, {"logprobs", sft_lp}}).at("sft") == 2.0);
    CHECK(post(*s, "/losses", {{"examples_ref", "phase1"}, {"logprobs", Json::array({{{"example_id", "x"}, {"logprobs", {-1.0}}}})}}, 404)
              .at("error") == "UnknownExample");
    CHECK(post(*s, "/losses", {{"examples_ref", "other"}, {"logprobs", Json::array()}}, 400).at("error") == "SchemaViolation");
}

TEST_CASE("sessions drive a turn over the socket-free interface") {
    Fixture f;
    auto s = f.make();
    const auto& rec = f.records[0];
    Json opened = post(*s, "/session", {{"record_id", rec.id}, {"want_logprobs", true}});
    const std::string id = opened.at("session_id");
    CHECK(id == "session-1");
    CHECK(opened.at("request").at("want_logprobs") == true);

    Json last;
    for (const auto& text : oracle_script(rec)) {
        last = post(*s, "/session/" + id + "/step", PolicyResponse{text}.to_json());
    }
    REQUIRE(last.at("done") == true);
    const std::string trajectory = last.at("trajectory");
    CHECK(check_format(trajectory));
    CHECK(score(trajectory, rec.all_steps(), *f.registry).total == 3.0);

    // finished sessions are forgotten
    CHECK(post(*s, "/session/" + id + "/step", PolicyResponse{"<response>x</response>"}.to_json(), 404).at("error") ==
          "UnknownSession");

    // a protocol error closes the session
    const std::string id2 = post(*s, "/session", {{"user_text", "hello"}}).at("session_id");
    CHECK(id2 == "session-2");
    CHECK(post(*s, "/session/" + id2 + "/step", PolicyResponse{"<think>only</think>"}.to_json(), 400).at("error") ==
          "PolicyProtocolError");
    CHECK(post(*s, "/session/" + id2 + "/step", PolicyResponse{"<response>x</response>"}.to_json(), 404).at("error") ==
          "UnknownSession");

    CHECK(post(*s, "/session", Json::object(), 400).at("error") == "SchemaViolation");
    CHECK(post(*s, "/session", {{"user_text", "a </user> b"}}, 400).at("error") == "MalformedUserText");
}

TEST_CASE("over capacity requests get 503") {
    Fixture f;
    Config config;
    config.service.max_concurrent = 1;
    config.service.port = 0;
    auto s = f.make(config);
    const int port = s->bind();
    std::thread server([&] { s->listen(); });

    // Slow requests overlap on the server's worker threads; with one admission
    // slot some of them must be turned away. Rounds repeat until that happens.
    std::string big = "<think>";
    for (int i = 0; i < 20000; ++i) big += "lots of reasoning text ";
    big += "</think><response>r</response>";
    const std::string body = Json{{"text", big}, {"record_id", f.records[0].id}}.dump();

    int rejected = 0;
    int ok = 0;
    for (int round = 0; round < 20 && rejected == 0; ++round) {
        std::vector<std::thread> clients;
        std::mutex m;
        for (int c = 0; c < 4; ++c) {
            clients.emplace_back([&] {
                httplib::Client client("127.0.0.1", port);
                client.set_read_timeout(30, 0);
                auto res = client.Post("/score", body, "application/json");
                std::lock_guard lock(m);
                if (!res) return;
                if (res->status == 503) {
                    ++rejected;
                    CHECK(Json::parse(res->body).at("error") == "OverCapacity");
                } else if (res->status == 200) {
                    ++ok;
                }
            });
        }
        for (auto& t : clients) t.join();
    }
    CHECK(rejected > 0);
    CHECK(ok > 0);
    CHECK(s->in_flight() == 0);
    s->stop();
    server.join();
}
