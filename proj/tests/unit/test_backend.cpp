#include "doctest.h"
#include "helpers.hpp"

#include "edgetalk/backend.hpp"
#include "edgetalk/mqtt.hpp"

#include "httplib.h"
#include "json.hpp"

#include <atomic>
#include <thread>

using namespace edgetalk;
using namespace std::chrono_literals;

namespace {

struct Recorded {
    std::string method;
    std::string path;
    std::string content_type;
    std::string body;
};

// Local stand-in for the model server. `reply` decides status and body.
class StubServer {
public:
    using Reply = std::function<void(const httplib::Request&, httplib::Response&)>;

    explicit StubServer(Reply reply) : reply_(std::move(reply)) {
        server_.Post("/api/generate", [this](const httplib::Request& req, httplib::Response& res) {
            {
                std::lock_guard lock(mutex_);
                requests_.push_back({req.method, req.path, req.get_header_value("Content-Type"), req.body});
            }
            reply_(req, res);
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~StubServer() {
        server_.stop();
        thread_.join();
    }
    std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_) + "/api/generate"; }
    std::vector<Recorded> requests() {
        std::lock_guard lock(mutex_);
        return requests_;
    }

private:
    Reply reply_;
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
    std::mutex mutex_;
    std::vector<Recorded> requests_;
};

StructuredPrompt sleep_prompt() {
    PromptBundle b{"I want to sleep now", {"light", "tv", "fan"}, {{"light", "on"}, {"tv", "on"}, {"fan", "off"}}, {}};
    return build_structured_prompt(b);
}

ErrorCode code_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    return ErrorCode::internal;
}

} // namespace

TEST_CASE("request body is exactly model, prompt, stream=false") {
    CHECK(generate_request_body("llama3", "hi \"there\"\n") == R"({"model":"llama3","prompt":"hi \"there\"\n","stream":false})");
}

TEST_CASE("http backend posts the prompt and returns the response field verbatim") {
    const std::string raw = testutil::slurp(testutil::fixture("parser/sleep_transcript.txt"));
    StubServer stub([&](const httplib::Request&, httplib::Response& res) {
        nlohmann::json body{{"model", "llama3"}, {"response", raw}, {"done", true}};
        res.set_content(body.dump(), "application/json");
    });
    HttpBackend backend(stub.endpoint(), "llama3", 5s);
    auto prompt = sleep_prompt();
    auto result = backend.generate(prompt);

    CHECK(result.raw_text == raw);
    CHECK(result.backend_id == "http:llama3");
    CHECK(result.latency > 0ns);

    auto reqs = stub.requests();
    REQUIRE(reqs.size() == 1);
    CHECK(reqs[0].method == "POST");
    CHECK(reqs[0].path == "/api/generate");
    CHECK(reqs[0].content_type == "application/json");
    CHECK(reqs[0].body == generate_request_body("llama3", prompt.text));
    auto parsed = nlohmann::ordered_json::parse(reqs[0].body);
    CHECK(parsed.size() == 3);
    CHECK(parsed["prompt"] == prompt.text);
    CHECK(parsed["stream"] == false);
}

TEST_CASE("http backend error mapping") {
    auto prompt = sleep_prompt();

    SUBCASE("timeout") {
        StubServer stub([](const httplib::Request&, httplib::Response& res) {
            std::this_thread::sleep_for(1500ms);
            res.set_content(R"({"response":"late"})", "application/json");
        });
        HttpBackend backend(stub.endpoint(), "llama3", 300ms);
        CHECK(code_of([&] { backend.generate(prompt); }) == ErrorCode::backend_timeout);
    }
    SUBCASE("connection refused") {
        int port = 0;
        {
            mqtt::Broker probe; // closes its listener on destruction, unlike an unstarted httplib::Server
            probe.start();
            port = probe.port();
        }
        HttpBackend backend("http://127.0.0.1:" + std::to_string(port) + "/api/generate", "llama3", 2s);
        CHECK(code_of([&] { backend.generate(prompt); }) == ErrorCode::backend_connection);
    }
    SUBCASE("http status") {
        StubServer stub([](const httplib::Request&, httplib::Response& res) {
            res.status = 500;
            res.set_content(R"({"error":"model not loaded"})", "application/json");
        });
        HttpBackend backend(stub.endpoint(), "llama3", 2s);
        CHECK(code_of([&] { backend.generate(prompt); }) == ErrorCode::backend_http_status);
    }
    SUBCASE("missing response field") {
        StubServer stub([](const httplib::Request&, httplib::Response& res) {
            res.set_content(R"({"done":true})", "application/json");
        });
        HttpBackend backend(stub.endpoint(), "llama3", 2s);
        CHECK(code_of([&] { backend.generate(prompt); }) == ErrorCode::backend_missing_field);
    }
    SUBCASE("body is not JSON") {
        StubServer stub([](const httplib::Request&, httplib::Response& res) { res.set_content("oops", "text/plain"); });
        HttpBackend backend(stub.endpoint(), "llama3", 2s);
        CHECK(code_of([&] { backend.generate(prompt); }) == ErrorCode::backend_missing_field);
    }
}

TEST_CASE("endpoint must be http") {
    CHECK(code_of([] { HttpBackend("https://example.org/api/generate", "m", 1s); }) == ErrorCode::config_error);
    CHECK(code_of([] { HttpBackend("localhost:11434", "m", 1s); }) == ErrorCode::config_error);
}

TEST_CASE("scripted backend answers by user command after its delay") {
    auto backend = ScriptedBackend::parse_script(
        R"({"match": "I want to sleep now", "response": "zzz", "delay_seconds": 0.2})"
        "\n\n"
        R"({"match": "Set the room for Study", "response": "books"})",
        "test-script");
    auto started = std::chrono::steady_clock::now();
    auto r = backend.generate(sleep_prompt());
    auto wall = std::chrono::steady_clock::now() - started;
    CHECK(r.raw_text == "zzz");
    CHECK(r.backend_id == "test-script");
    CHECK(r.latency >= 200ms);
    CHECK(r.latency < 250ms);
    CHECK(wall >= 200ms);

    PromptBundle other{"Dance party", {"light"}, {}, {}};
    CHECK(code_of([&] { backend.generate(build_structured_prompt(other)); }) == ErrorCode::unscripted_input);
}

TEST_CASE("script parsing errors") {
    CHECK(code_of([] { ScriptedBackend::parse_script("not json"); }) == ErrorCode::parse_error);
    CHECK(code_of([] { ScriptedBackend::parse_script(R"({"match":"a"})"); }) == ErrorCode::parse_error);
    CHECK(code_of([] { ScriptedBackend::parse_script(R"({"match":"a","response":"x","delay_seconds":-1})"); }) ==
          ErrorCode::parse_error);
    CHECK(code_of([] {
              ScriptedBackend::parse_script(R"({"match":"a","response":"x"})"
                                            "\n"
                                            R"({"match":"a","response":"y"})");
          }) == ErrorCode::parse_error);
}

TEST_CASE("shipped scripts load") {
    auto llama = ScriptedBackend::load_script(testutil::data("scenarios/llama3.script.jsonl"));
    REQUIRE(llama.entries().size() == 3);
    CHECK(llama.entries()[2].match == "I want to sleep now");
    CHECK(llama.entries()[2].response + "\n" == testutil::slurp(testutil::fixture("parser/sleep_transcript.txt")));
    CHECK(llama.entries()[2].delay == 126ms);
    auto gemma = ScriptedBackend::load_script(testutil::data("scenarios/gemma2b.script.jsonl"));
    CHECK(gemma.entries().size() == 3);
}

TEST_CASE("make_backend") {
    BackendConfig c;
    c.kind = BackendConfig::Kind::scripted;
    c.script_path = testutil::data("scenarios/gemma2b.script.jsonl");
    auto b = make_backend(c);
    CHECK(dynamic_cast<ScriptedBackend*>(b.get()) != nullptr);
    c.kind = BackendConfig::Kind::http;
    c.script_path.clear();
    c.model_name = "gemma:2b";
    CHECK(make_backend(c)->id() == "http:gemma:2b");
}
