#include "edgetalk/edgetalk.h"

#include "edgetalk/api_server.hpp"
#include "edgetalk/bench.hpp"
#include "edgetalk/gateway.hpp"
#include "edgetalk/simulator.hpp"

#include "httplib.h"

#include <spdlog/spdlog.h>

#include <cstdlib>
#include <cstring>

struct edgetalk_gateway {
    std::unique_ptr<edgetalk::Gateway> gateway;
    std::unique_ptr<edgetalk::ApiServer> api;
};

struct edgetalk_fleet {
    std::unique_ptr<edgetalk::Fleet> fleet;
};

struct edgetalk_broker {
    std::unique_ptr<edgetalk::mqtt::Broker> broker;
};

namespace {

using json = nlohmann::ordered_json;

thread_local std::string g_last_error;

edgetalk_status to_status(edgetalk::ErrorCode code) { return static_cast<edgetalk_status>(static_cast<int>(code) + 1); }

char* dup_string(const std::string& s) {
    auto* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (out == nullptr) throw std::bad_alloc();
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

template <typename F>
edgetalk_status guarded(F&& body) {
    try {
        body();
        g_last_error.clear();
        return EDGETALK_OK;
    } catch (const edgetalk::Error& e) {
        g_last_error = e.what();
        return to_status(e.code());
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return EDGETALK_E_INTERNAL;
    } catch (...) {
        g_last_error = "unknown failure";
        return EDGETALK_E_INTERNAL;
    }
}

void require(bool condition, const char* what) {
    if (!condition) throw edgetalk::Error(edgetalk::ErrorCode::invalid_argument, what);
}

edgetalk::GatewayConfig config_from_json(const char* text, const char* base_dir) {
    require(text != nullptr, "config_json is NULL");
    return edgetalk::parse_config(text, base_dir != nullptr ? base_dir : "");
}

} // namespace

extern "C" {

const char* edgetalk_version(void) { return "0.1.0"; }

const char* edgetalk_status_name(edgetalk_status status) {
    if (status == EDGETALK_OK) return "ok";
    if (status < EDGETALK_OK || status > EDGETALK_E_INTERNAL) return "unknown";
    return edgetalk::to_string(static_cast<edgetalk::ErrorCode>(static_cast<int>(status) - 1)).data();
}

const char* edgetalk_last_error(void) { return g_last_error.c_str(); }

void edgetalk_string_free(char* s) { std::free(s); }

edgetalk_status edgetalk_set_log_level(const char* level) {
    return guarded([&] {
        require(level != nullptr, "level is NULL");
        auto lvl = spdlog::level::from_str(level);
        if (lvl == spdlog::level::off && std::strcmp(level, "off") != 0) {
            throw edgetalk::Error(edgetalk::ErrorCode::invalid_argument, std::string("unknown log level: ") + level);
        }
        spdlog::set_level(lvl);
    });
}

edgetalk_status edgetalk_config_resolve(const char* cli_path, char** out_path) {
    return guarded([&] {
        require(out_path != nullptr, "out_path is NULL");
        std::optional<std::string> cli;
        if (cli_path != nullptr) cli = cli_path;
        *out_path = dup_string(edgetalk::resolve_config_path(cli).string());
    });
}

edgetalk_status edgetalk_gateway_open(const char* config_path, edgetalk_gateway** out) {
    return guarded([&] {
        require(config_path != nullptr && out != nullptr, "config_path and out are required");
        auto gw = std::make_unique<edgetalk_gateway>();
        gw->gateway = std::make_unique<edgetalk::Gateway>(edgetalk::load_config(config_path));
        *out = gw.release();
    });
}

edgetalk_status edgetalk_gateway_open_json(const char* config_json, const char* base_dir, edgetalk_gateway** out) {
    return guarded([&] {
        require(out != nullptr, "out is NULL");
        auto gw = std::make_unique<edgetalk_gateway>();
        gw->gateway = std::make_unique<edgetalk::Gateway>(config_from_json(config_json, base_dir));
        *out = gw.release();
    });
}

edgetalk_status edgetalk_gateway_start(edgetalk_gateway* gw) {
    return guarded([&] {
        require(gw != nullptr, "gateway is NULL");
        gw->gateway->start();
    });
}

edgetalk_status edgetalk_gateway_wait_connected(edgetalk_gateway* gw, int timeout_ms) {
    return guarded([&] {
        require(gw != nullptr, "gateway is NULL");
        if (!gw->gateway->wait_connected(std::chrono::milliseconds{timeout_ms})) {
            throw edgetalk::Error(edgetalk::ErrorCode::io_error, "broker not connected");
        }
    });
}

edgetalk_status edgetalk_gateway_serve(edgetalk_gateway* gw, int* out_port) {
    return guarded([&] {
        require(gw != nullptr, "gateway is NULL");
        if (!gw->api) {
            gw->api = std::make_unique<edgetalk::ApiServer>(*gw->gateway, gw->gateway->config().api);
            gw->api->start();
        }
        if (out_port != nullptr) *out_port = gw->api->port();
    });
}

edgetalk_status edgetalk_gateway_submit(edgetalk_gateway* gw, const char* session_id, const char* text,
                                        char** out_trace_json) {
    return guarded([&] {
        require(gw != nullptr && session_id != nullptr && text != nullptr && out_trace_json != nullptr,
                "gateway, session_id, text and out are required");
        auto trace = gw->gateway->submit_command(session_id, text);
        *out_trace_json = dup_string(edgetalk::to_json(trace).dump());
    });
}

edgetalk_status edgetalk_gateway_devices(edgetalk_gateway* gw, char** out_json) {
    return guarded([&] {
        require(gw != nullptr && out_json != nullptr, "gateway and out are required");
        json out = json::array();
        for (const auto& d : gw->gateway->get_devices()) out.push_back(edgetalk::to_json(d));
        *out_json = dup_string(out.dump());
    });
}

edgetalk_status edgetalk_gateway_trace(edgetalk_gateway* gw, const char* trace_id, char** out_json) {
    return guarded([&] {
        require(gw != nullptr && trace_id != nullptr && out_json != nullptr, "gateway, trace_id and out are required");
        *out_json = dup_string(edgetalk::to_json(gw->gateway->get_trace(trace_id)).dump());
    });
}

edgetalk_status edgetalk_gateway_traces(edgetalk_gateway* gw, const char* session_id, char** out_json) {
    return guarded([&] {
        require(gw != nullptr && out_json != nullptr, "gateway and out are required");
        json out = json::array();
        for (const auto& t : gw->gateway->list_traces(session_id != nullptr ? session_id : "")) {
            out.push_back(edgetalk::to_json(t));
        }
        *out_json = dup_string(out.dump());
    });
}

edgetalk_status edgetalk_gateway_health(edgetalk_gateway* gw, char** out_json) {
    return guarded([&] {
        require(gw != nullptr && out_json != nullptr, "gateway and out are required");
        *out_json = dup_string(edgetalk::to_json(gw->gateway->health()).dump());
    });
}

void edgetalk_gateway_close(edgetalk_gateway* gw) {
    if (gw == nullptr) return;
    gw->api.reset();
    gw->gateway.reset();
    delete gw;
}

namespace {

edgetalk_status open_fleet(const edgetalk::GatewayConfig& cfg, edgetalk_fleet** out) {
    auto f = std::make_unique<edgetalk_fleet>();
    auto broker = cfg.broker;
    f->fleet = std::make_unique<edgetalk::Fleet>(edgetalk::fleet_from_config(cfg), broker,
                                                 edgetalk::TopicScheme{cfg.topic_prefix}, cfg.simulator.seed);
    f->fleet->start();
    *out = f.release();
    return EDGETALK_OK;
}

} // namespace

edgetalk_status edgetalk_fleet_open(const char* config_path, edgetalk_fleet** out) {
    return guarded([&] {
        require(config_path != nullptr && out != nullptr, "config_path and out are required");
        open_fleet(edgetalk::load_config(config_path), out);
    });
}

edgetalk_status edgetalk_fleet_open_json(const char* config_json, const char* base_dir, edgetalk_fleet** out) {
    return guarded([&] {
        require(out != nullptr, "out is NULL");
        open_fleet(config_from_json(config_json, base_dir), out);
    });
}

edgetalk_status edgetalk_fleet_state(edgetalk_fleet* fleet, char** out_json) {
    return guarded([&] {
        require(fleet != nullptr && out_json != nullptr, "fleet and out are required");
        json out = json::object();
        for (const auto& [id, value] : fleet->fleet->fleet_state()) out[id] = value;
        *out_json = dup_string(out.dump());
    });
}

void edgetalk_fleet_close(edgetalk_fleet* fleet) {
    if (fleet == nullptr) return;
    fleet->fleet.reset();
    delete fleet;
}

edgetalk_status edgetalk_broker_open(const char* host, int port, edgetalk_broker** out) {
    return guarded([&] {
        require(out != nullptr, "out is NULL");
        require(port >= 0 && port <= 65535, "port out of range");
        auto b = std::make_unique<edgetalk_broker>();
        b->broker = std::make_unique<edgetalk::mqtt::Broker>(host != nullptr ? host : "127.0.0.1",
                                                             static_cast<std::uint16_t>(port));
        b->broker->start();
        *out = b.release();
    });
}

int edgetalk_broker_port(const edgetalk_broker* broker) {
    return broker != nullptr ? broker->broker->port() : -1;
}

void edgetalk_broker_close(edgetalk_broker* broker) {
    if (broker == nullptr) return;
    broker->broker.reset();
    delete broker;
}

edgetalk_status edgetalk_bench_run(const char* scenario_path, const char* broker_host, int broker_port,
                                   const char* format, int include_timing, char** out_report, double* out_accuracy) {
    return guarded([&] {
        require(scenario_path != nullptr && out_report != nullptr, "scenario_path and out_report are required");
        auto fmt = edgetalk::parse_report_format(format != nullptr ? format : "table");
        edgetalk::BenchOptions options;
        if (broker_port > 0) {
            options.broker_port = broker_port;
            if (broker_host != nullptr) options.broker_host = broker_host;
        }
        auto report = edgetalk::run_scenario(edgetalk::load_scenario(scenario_path), options);
        *out_report = dup_string(edgetalk::emit_report(report, fmt, include_timing != 0));
        if (out_accuracy != nullptr) *out_accuracy = report.accuracy().value_or(-1.0);
    });
}

edgetalk_status edgetalk_client_request(const char* base_url, const char* method, const char* path, const char* body,
                                        int* out_http_status, char** out_body) {
    return guarded([&] {
        require(base_url != nullptr && method != nullptr && path != nullptr && out_http_status != nullptr &&
                    out_body != nullptr,
                "base_url, method, path and outputs are required");
        httplib::Client client(base_url);
        client.set_connection_timeout(5, 0);
        client.set_read_timeout(600, 0); // a live model can take minutes
        httplib::Result res;
        std::string m = method;
        if (m == "GET") {
            res = client.Get(path);
        } else if (m == "POST") {
            res = client.Post(path, body != nullptr ? body : "", "application/json");
        } else {
            throw edgetalk::Error(edgetalk::ErrorCode::invalid_argument, "method must be GET or POST");
        }
        if (!res) {
            throw edgetalk::Error(edgetalk::ErrorCode::io_error,
                                  std::string("cannot reach gateway at ") + base_url + ": " + httplib::to_string(res.error()));
        }
        *out_http_status = res->status;
        *out_body = dup_string(res->body);
    });
}

edgetalk_status edgetalk_trace_render(const char* trace_json, char** out_text) {
    return guarded([&] {
        require(trace_json != nullptr && out_text != nullptr, "trace_json and out_text are required");
        auto doc = json::parse(trace_json, nullptr, false);
        if (doc.is_discarded()) throw edgetalk::Error(edgetalk::ErrorCode::parse_error, "trace is not JSON");
        *out_text = dup_string(edgetalk::render_trace(edgetalk::trace_from_json(doc)));
    });
}

} // extern "C"
