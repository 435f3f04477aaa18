#include "edgetalk/edgetalk.h"

#include "CLI11.hpp"
#include "json.hpp"
#include "signals.hpp"

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <string>

namespace {

int fail(edgetalk_status st, const char* what) {
    std::fprintf(stderr, "edgetalk: %s: %s (%s)\n", what, edgetalk_last_error(), edgetalk_status_name(st));
    return 1;
}

std::string take(char* s) {
    std::string out = s != nullptr ? s : "";
    edgetalk_string_free(s);
    return out;
}

int serve(const std::string& config_flag) {
    auto signals = block_shutdown_signals();
    char* path = nullptr;
    auto st = edgetalk_config_resolve(config_flag.empty() ? nullptr : config_flag.c_str(), &path);
    if (st != EDGETALK_OK) return fail(st, "config");
    auto config_path = take(path);

    edgetalk_gateway* gw = nullptr;
    if ((st = edgetalk_gateway_open(config_path.c_str(), &gw)) != EDGETALK_OK) return fail(st, "open gateway");
    if ((st = edgetalk_gateway_start(gw)) != EDGETALK_OK) {
        edgetalk_gateway_close(gw);
        return fail(st, "start gateway");
    }
    int port = 0;
    if ((st = edgetalk_gateway_serve(gw, &port)) != EDGETALK_OK) {
        edgetalk_gateway_close(gw);
        return fail(st, "serve");
    }
    std::printf("edgetalk gateway on port %d (config %s)\n", port, config_path.c_str());
    std::fflush(stdout);
    int sig = wait_for_shutdown(signals);
    std::fprintf(stderr, "edgetalk: signal %d, shutting down\n", sig);
    edgetalk_gateway_close(gw);
    return 0;
}

int request(const std::string& url, const char* method, const std::string& path, const std::string& body,
            std::string& reply) {
    int http = 0;
    char* out = nullptr;
    auto st = edgetalk_client_request(url.c_str(), method, path.c_str(), body.empty() ? nullptr : body.c_str(), &http,
                                      &out);
    if (st != EDGETALK_OK) {
        fail(st, "request");
        return -1;
    }
    reply = take(out);
    return http;
}

void print_api_error(int http, const std::string& body) {
    auto doc = nlohmann::json::parse(body, nullptr, false);
    if (!doc.is_discarded() && doc.contains("error")) {
        std::fprintf(stderr, "edgetalk: HTTP %d: %s: %s\n", http, doc["error"].value("code", "").c_str(),
                     doc["error"].value("message", "").c_str());
    } else {
        std::fprintf(stderr, "edgetalk: HTTP %d: %s\n", http, body.c_str());
    }
}

int say(const std::string& url, const std::string& session, const std::string& text, bool raw_json) {
    nlohmann::json body{{"session_id", session}, {"text", text}};
    std::string reply;
    int http = request(url, "POST", "/command", body.dump(), reply);
    if (http < 0) return 1;
    if (http != 200) {
        print_api_error(http, reply);
        return 1;
    }
    if (raw_json) {
        std::cout << reply << "\n";
    } else {
        char* text_out = nullptr;
        auto st = edgetalk_trace_render(reply.c_str(), &text_out);
        if (st != EDGETALK_OK) return fail(st, "render");
        std::cout << take(text_out);
    }
    auto doc = nlohmann::json::parse(reply, nullptr, false);
    return !doc.is_discarded() && doc.value("status", "") == "ok" ? 0 : 2;
}

int devices(const std::string& url, bool raw_json) {
    std::string reply;
    int http = request(url, "GET", "/devices", "", reply);
    if (http < 0) return 1;
    if (http != 200) {
        print_api_error(http, reply);
        return 1;
    }
    if (raw_json) {
        std::cout << reply << "\n";
        return 0;
    }
    auto doc = nlohmann::json::parse(reply, nullptr, false);
    if (doc.is_discarded() || !doc.is_array()) {
        std::fprintf(stderr, "edgetalk: unexpected /devices reply\n");
        return 1;
    }
    std::printf("%-12s %-8s %-10s %s\n", "DEVICE", "KIND", "STATE", "SOURCE");
    for (const auto& d : doc) {
        std::printf("%-12s %-8s %-10s %s\n", d.value("id", "").c_str(), d.value("kind", "").c_str(),
                    d.value("display", "").c_str(), d.value("source", "").c_str());
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"edgetalk: natural-language control of MQTT devices"};
    app.require_subcommand(1);
    std::string log_level = "info";
    app.add_option("--log-level", log_level, "trace|debug|info|warn|error|off");

    std::string default_url = "http://127.0.0.1:8080";
    if (const char* env = std::getenv("EDGETALK_URL")) default_url = env;

    std::string config;
    auto* serve_cmd = app.add_subcommand("serve", "run the gateway (REST + /events)");
    serve_cmd->add_option("--config", config, "gateway config (default: $EDGETALK_CONFIG)");

    std::string url = default_url, session = "cli", text;
    bool raw_json = false;
    auto* say_cmd = app.add_subcommand("say", "send one command to a running gateway");
    say_cmd->add_option("command", text, "natural-language command")->required();
    say_cmd->add_option("--url", url, "gateway base URL (default $EDGETALK_URL or http://127.0.0.1:8080)");
    say_cmd->add_option("--session", session, "session id");
    say_cmd->add_flag("--json", raw_json, "print the trace JSON");

    auto* devices_cmd = app.add_subcommand("devices", "list devices of a running gateway");
    devices_cmd->add_option("--url", url, "gateway base URL");
    devices_cmd->add_flag("--json", raw_json, "print the raw JSON");

    CLI11_PARSE(app, argc, argv);

    if (auto st = edgetalk_set_log_level(log_level.c_str()); st != EDGETALK_OK) return fail(st, "log level");
    if (*serve_cmd) return serve(config);
    if (*say_cmd) return say(url, session, text, raw_json);
    return devices(url, raw_json);
}
