#include "edgetalk/backend.hpp"

#include "httplib.h"
#include "json.hpp"

#include <fstream>
#include <sstream>
#include <thread>

namespace edgetalk {

using SteadyClock = std::chrono::steady_clock;

void BackendConfig::validate() const {
    if (timeout.count() <= 0) throw Error(ErrorCode::config_error, "backend timeout must be positive");
    if (kind == Kind::http) {
        if (endpoint.empty() || model_name.empty()) throw Error(ErrorCode::config_error, "http backend needs endpoint and model");
        if (!script_path.empty()) throw Error(ErrorCode::config_error, "http backend must not set script_path");
    } else {
        if (script_path.empty()) throw Error(ErrorCode::config_error, "scripted backend needs script_path");
    }
}

std::string generate_request_body(std::string_view model, std::string_view prompt) {
    nlohmann::ordered_json body;
    body["model"] = model;
    body["prompt"] = prompt;
    body["stream"] = false;
    return body.dump();
}

HttpBackend::HttpBackend(std::string endpoint, std::string model_name, std::chrono::milliseconds timeout)
    : model_name_(std::move(model_name)), timeout_(timeout) {
    auto scheme_end = endpoint.find("://");
    if (scheme_end == std::string::npos || endpoint.substr(0, scheme_end) != "http") {
        throw Error(ErrorCode::config_error, "backend endpoint must be an http:// URL: " + endpoint);
    }
    auto path_start = endpoint.find('/', scheme_end + 3);
    base_url_ = endpoint.substr(0, path_start);
    path_ = path_start == std::string::npos ? "/" : endpoint.substr(path_start);
}

InferenceResult HttpBackend::generate(const StructuredPrompt& prompt) {
    httplib::Client client(base_url_);
    auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout_);
    auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout_ - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());

    auto started = SteadyClock::now();
    auto res = client.Post(path_, generate_request_body(model_name_, prompt.text), "application/json");
    auto latency = SteadyClock::now() - started;

    if (!res) {
        auto err = res.error();
        bool timed_out = err == httplib::Error::ConnectionTimeout ||
                         (err == httplib::Error::Read && latency >= timeout_ * 9 / 10);
        if (timed_out) throw Error(ErrorCode::backend_timeout, "model server did not answer within the timeout");
        throw Error(ErrorCode::backend_connection, "model server unreachable: " + httplib::to_string(err));
    }
    if (res->status >= 400) {
        throw Error(ErrorCode::backend_http_status, "model server returned HTTP " + std::to_string(res->status));
    }
    auto body = nlohmann::json::parse(res->body, nullptr, false);
    if (body.is_discarded() || !body.is_object() || !body.contains("response") || !body["response"].is_string()) {
        throw Error(ErrorCode::backend_missing_field, "model server reply has no string \"response\" field");
    }
    auto text = body["response"].get<std::string>();
    if (text.empty()) throw Error(ErrorCode::backend_missing_field, "model server returned an empty response");
    return InferenceResult{std::move(text), std::chrono::duration_cast<std::chrono::nanoseconds>(latency), id()};
}

ScriptedBackend::ScriptedBackend(std::vector<ScriptEntry> entries, std::string label)
    : entries_(std::move(entries)), label_(std::move(label)) {
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        if (entries_[i].response.empty()) {
            throw Error(ErrorCode::parse_error, "script entry '" + entries_[i].match + "' has an empty response");
        }
        if (!index_.emplace(entries_[i].match, i).second) {
            throw Error(ErrorCode::parse_error, "duplicate script match '" + entries_[i].match + "'");
        }
    }
}

ScriptedBackend ScriptedBackend::parse_script(std::string_view text, std::string label) {
    std::vector<ScriptEntry> entries;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t lineno = 0;
    std::map<std::string, std::size_t> seen;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        auto fail = [&](const std::string& why) {
            return Error(ErrorCode::parse_error, "script line " + std::to_string(lineno) + ": " + why);
        };
        auto doc = nlohmann::json::parse(line, nullptr, false);
        if (doc.is_discarded() || !doc.is_object()) throw fail("not a JSON object");
        if (!doc.contains("match") || !doc["match"].is_string()) throw fail("\"match\" must be a string");
        if (!doc.contains("response") || !doc["response"].is_string()) throw fail("\"response\" must be a string");
        double delay = 0;
        if (doc.contains("delay_seconds")) {
            if (!doc["delay_seconds"].is_number() || doc["delay_seconds"].get<double>() < 0) {
                throw fail("\"delay_seconds\" must be a non-negative number");
            }
            delay = doc["delay_seconds"].get<double>();
        }
        ScriptEntry e;
        e.match = doc["match"].get<std::string>();
        e.response = doc["response"].get<std::string>();
        e.delay = std::chrono::milliseconds{static_cast<std::int64_t>(delay * 1000.0 + 0.5)};
        if (e.response.empty()) throw fail("\"response\" must not be empty");
        if (!seen.emplace(e.match, lineno).second) throw fail("duplicate match '" + e.match + "'");
        entries.push_back(std::move(e));
    }
    return ScriptedBackend(std::move(entries), std::move(label));
}

ScriptedBackend ScriptedBackend::load_script(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::io_error, "cannot read script " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    auto label = path.filename().string();
    if (auto dot = label.find('.'); dot != std::string::npos) label.resize(dot);
    try {
        return parse_script(buf.str(), "scripted:" + label);
    } catch (const Error& e) {
        throw Error(e.code(), path.string() + ": " + e.what());
    }
}

InferenceResult ScriptedBackend::generate(const StructuredPrompt& prompt) {
    auto started = SteadyClock::now();
    auto command = command_from_prompt(prompt.text);
    auto it = index_.find(command);
    if (it == index_.end()) throw Error(ErrorCode::unscripted_input, "no scripted response for '" + command + "'");
    const auto& entry = entries_[it->second];
    if (entry.delay.count() > 0) std::this_thread::sleep_until(started + entry.delay);
    auto latency = SteadyClock::now() - started;
    return InferenceResult{entry.response, std::chrono::duration_cast<std::chrono::nanoseconds>(latency), label_};
}

std::unique_ptr<Backend> make_backend(const BackendConfig& config) {
    config.validate();
    if (config.kind == BackendConfig::Kind::http) {
        return std::make_unique<HttpBackend>(config.endpoint, config.model_name, config.timeout);
    }
    return std::make_unique<ScriptedBackend>(ScriptedBackend::load_script(config.script_path));
}

} // namespace edgetalk
