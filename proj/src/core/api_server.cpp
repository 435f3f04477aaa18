#include "edgetalk/api_server.hpp"

#include "edgetalk/gateway.hpp"

#include "httplib.h"

#include <spdlog/spdlog.h>

namespace edgetalk {

namespace {

using json = nlohmann::ordered_json;

constexpr const char* kJson = "application/json";
constexpr auto kKeepaliveEvery = std::chrono::seconds(15);

int http_status_for(ErrorCode code) {
    switch (code) {
    case ErrorCode::not_found: return 404;
    case ErrorCode::session_busy: return 429;
    case ErrorCode::invalid_argument:
    case ErrorCode::rejected_input:
    case ErrorCode::parse_error: return 400;
    default: return 500;
    }
}

void send_error(httplib::Response& res, ErrorCode code, const std::string& message) {
    res.status = http_status_for(code);
    res.set_content(json{{"error", {{"code", to_string(code)}, {"message", message}}}}.dump(), kJson);
}

} // namespace

ApiServer::ApiServer(Gateway& gateway, ApiSettings settings)
    : gateway_(gateway), settings_(std::move(settings)), server_(std::make_unique<httplib::Server>()) {
    // Every open /events stream holds a worker, so leave room for them.
    server_->new_task_queue = [] { return new httplib::ThreadPool(32); };
    install_routes();
}

ApiServer::~ApiServer() { stop(); }

void ApiServer::install_routes() {
    auto& svr = *server_;

    svr.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
        try {
            std::rethrow_exception(ep);
        } catch (const Error& e) {
            send_error(res, e.code(), e.what());
        } catch (const std::exception& e) {
            send_error(res, ErrorCode::internal, e.what());
        }
    });

    svr.Post("/command", [this](const httplib::Request& req, httplib::Response& res) {
        auto body = json::parse(req.body, nullptr, false);
        if (body.is_discarded() || !body.is_object() || !body.contains("text") || !body["text"].is_string()) {
            send_error(res, ErrorCode::invalid_argument, "body must be {\"session_id\": string, \"text\": string}");
            return;
        }
        std::string session = "default";
        if (body.contains("session_id")) {
            if (!body["session_id"].is_string() || body["session_id"].get<std::string>().empty()) {
                send_error(res, ErrorCode::invalid_argument, "session_id must be a non-empty string");
                return;
            }
            session = body["session_id"].get<std::string>();
        }
        auto trace = gateway_.submit_command(session, body["text"].get<std::string>());
        res.set_content(to_json(trace).dump(), kJson);
    });

    svr.Get("/devices", [this](const httplib::Request&, httplib::Response& res) {
        json out = json::array();
        for (const auto& d : gateway_.get_devices()) out.push_back(to_json(d));
        res.set_content(out.dump(), kJson);
    });

    svr.Get(R"(/traces/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
        res.set_content(to_json(gateway_.get_trace(req.matches[1])).dump(), kJson);
    });

    svr.Get("/traces", [this](const httplib::Request& req, httplib::Response& res) {
        json out = json::array();
        for (const auto& t : gateway_.list_traces(req.get_param_value("session"))) out.push_back(to_json(t));
        res.set_content(out.dump(), kJson);
    });

    svr.Get("/health", [this](const httplib::Request&, httplib::Response& res) {
        res.set_content(to_json(gateway_.health()).dump(), kJson);
    });

    svr.Get("/events", [this](const httplib::Request&, httplib::Response& res) {
        auto sub = gateway_.subscribe_events();
        res.set_header("Cache-Control", "no-cache");
        res.set_chunked_content_provider(
            "text/event-stream",
            [sub, idle = std::chrono::steady_clock::duration{}](std::size_t, httplib::DataSink& sink) mutable {
                constexpr auto kPoll = std::chrono::milliseconds(250);
                if (auto event = sub->next(kPoll)) {
                    idle = {};
                    auto frame = "data: " + *event + "\n\n";
                    return sink.write(frame.data(), frame.size());
                }
                if (sub->closed()) {
                    sink.done();
                    return true;
                }
                idle += kPoll;
                if (idle >= kKeepaliveEvery) {
                    idle = {};
                    static constexpr std::string_view ping = ": keepalive\n\n";
                    return sink.write(ping.data(), ping.size());
                }
                return sink.is_writable();
            },
            [sub](bool) { sub->close(); });
    });

    if (!settings_.static_dir.empty()) {
        if (!svr.set_mount_point("/", settings_.static_dir.string())) {
            spdlog::warn("static directory {} does not exist; UI not served", settings_.static_dir.string());
        }
    }
}

void ApiServer::start() {
    if (thread_.joinable()) return;
    if (settings_.port == 0) {
        port_ = server_->bind_to_any_port(settings_.host);
    } else {
        port_ = server_->bind_to_port(settings_.host, settings_.port) ? settings_.port : -1;
    }
    if (port_ <= 0) {
        throw Error(ErrorCode::io_error,
                    "cannot listen on " + settings_.host + ":" + std::to_string(settings_.port));
    }
    thread_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
    spdlog::info("api listening on {}:{}", settings_.host, port_);
}

void ApiServer::stop() {
    if (!thread_.joinable()) return;
    gateway_.events().close_all();
    server_->stop();
    thread_.join();
}

} // namespace edgetalk
