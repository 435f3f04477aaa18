#include "edgetalk/config.hpp"

#include "json.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace edgetalk {

namespace {

using json = nlohmann::json;

[[noreturn]] void fail(const std::string& what) { throw Error(ErrorCode::config_error, what); }

template <typename T>
T get_or(const json& obj, const char* key, T fallback, const std::string& where) {
    if (!obj.contains(key) || obj[key].is_null()) return fallback;
    try {
        return obj[key].get<T>();
    } catch (const json::exception&) {
        fail(where + "." + key + " has the wrong type");
    }
}

const json& section(const json& root, const char* key) {
    static const json empty = json::object();
    if (!root.contains(key)) return empty;
    if (!root[key].is_object()) fail(std::string(key) + " must be an object");
    return root[key];
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    if (p.empty()) return {};
    std::filesystem::path path(p);
    return (path.is_absolute() || base.empty() ? path : base / path).lexically_normal();
}

std::chrono::milliseconds seconds_field(const json& obj, const char* key, std::chrono::milliseconds fallback,
                                        const std::string& where) {
    auto secs = get_or<double>(obj, key, -1, where);
    if (secs < 0) return fallback;
    return std::chrono::milliseconds{static_cast<std::int64_t>(secs * 1000.0 + 0.5)};
}

DeviceDescriptor parse_device(const json& item, std::size_t index) {
    auto where = "devices[" + std::to_string(index) + "]";
    if (!item.is_object()) fail(where + " must be an object");
    DeviceDescriptor d;
    d.id = get_or<std::string>(item, "id", "", where);
    try {
        d.kind = parse_device_kind(get_or<std::string>(item, "kind", "other", where));
    } catch (const Error& e) {
        fail(where + ": " + e.what());
    }
    d.capabilities = get_or<std::vector<std::string>>(item, "capabilities", {}, where);
    d.unit = get_or<std::string>(item, "unit", "", where);
    d.status_topic = get_or<std::string>(item, "status_topic", "", where);
    d.command_topic = get_or<std::string>(item, "command_topic", "", where);
    return d;
}

} // namespace

void GatewayConfig::validate() const {
    broker.validate();
    backend.validate();
    if (devices.empty()) fail("devices must list at least one device");
    std::set<std::string> ids;
    for (const auto& d : devices) {
        if (!is_valid_device_id(d.id)) fail("malformed device id '" + d.id + "'");
        if (!ids.insert(d.id).second) fail("duplicate device id '" + d.id + "'");
        if (is_actuator(d.kind) && d.capabilities.empty()) fail("device '" + d.id + "' has no capabilities");
    }
    if (session_queue_depth == 0) fail("session_queue_depth must be at least 1");
    if (api.port < 0 || api.port > 65535) fail("api.port out of range");
    if (!history_path.empty()) {
        auto dir = history_path.parent_path();
        std::error_code ec;
        if (!dir.empty() && !std::filesystem::exists(dir, ec)) {
            std::filesystem::create_directories(dir, ec);
            if (ec) fail("cannot create history directory " + dir.string() + ": " + ec.message());
        }
    }
    for (const auto& [id, sim] : simulator.devices) {
        if (!ids.count(id)) fail("simulator.devices names unknown device '" + id + "'");
        if (sim.drop_probability < 0 || sim.drop_probability > 1) {
            fail("simulator drop_probability for '" + id + "' must be in [0,1]");
        }
    }
}

GatewayConfig parse_config(std::string_view json_text, const std::filesystem::path& base_dir) {
    auto root = json::parse(json_text, nullptr, false);
    if (root.is_discarded()) fail("config is not valid JSON");
    if (!root.is_object()) fail("config must be a JSON object");

    GatewayConfig cfg;

    const auto& broker = section(root, "broker");
    cfg.broker.host = get_or<std::string>(broker, "host", cfg.broker.host, "broker");
    cfg.broker.port = get_or<int>(broker, "port", cfg.broker.port, "broker");
    cfg.broker.client_id = get_or<std::string>(broker, "client_id", cfg.broker.client_id, "broker");
    cfg.broker.keepalive_seconds = get_or<int>(broker, "keepalive_seconds", cfg.broker.keepalive_seconds, "broker");
    cfg.broker.qos = get_or<int>(broker, "qos", cfg.broker.qos, "broker");
    cfg.broker.backoff_initial =
        std::chrono::milliseconds{get_or<std::int64_t>(broker, "backoff_initial_ms", cfg.broker.backoff_initial.count(), "broker")};
    cfg.broker.backoff_max =
        std::chrono::milliseconds{get_or<std::int64_t>(broker, "backoff_max_ms", cfg.broker.backoff_max.count(), "broker")};

    cfg.topic_prefix = get_or<std::string>(root, "topic_prefix", cfg.topic_prefix, "config");

    if (root.contains("devices")) {
        if (!root["devices"].is_array()) fail("devices must be an array");
        std::size_t i = 0;
        for (const auto& item : root["devices"]) cfg.devices.push_back(parse_device(item, i++));
    }

    const auto& backend = section(root, "backend");
    auto kind = get_or<std::string>(backend, "kind", "http", "backend");
    if (kind == "http") {
        cfg.backend.kind = BackendConfig::Kind::http;
    } else if (kind == "scripted") {
        cfg.backend.kind = BackendConfig::Kind::scripted;
    } else {
        fail("backend.kind must be \"http\" or \"scripted\"");
    }
    cfg.backend.endpoint = get_or<std::string>(backend, "endpoint", cfg.backend.endpoint, "backend");
    cfg.backend.model_name = get_or<std::string>(backend, "model", cfg.backend.model_name, "backend");
    cfg.backend.timeout = seconds_field(backend, "timeout_seconds", cfg.backend.timeout, "backend");
    cfg.backend.script_path = resolve(base_dir, get_or<std::string>(backend, "script_path", "", "backend"));

    cfg.history_path = resolve(base_dir, get_or<std::string>(root, "history_path", "", "config"));

    if (root.contains("synonyms")) {
        if (!root["synonyms"].is_object()) fail("synonyms must be an object of canonical -> [words]");
        for (const auto& [canonical, words] : root["synonyms"].items()) {
            if (!words.is_array()) fail("synonyms." + canonical + " must be an array");
            for (const auto& w : words) {
                if (!w.is_string()) fail("synonyms." + canonical + " must hold strings");
                cfg.synonyms.add(canonical, w.get<std::string>());
            }
        }
    }

    const auto& prompt = section(root, "prompt");
    cfg.prompt.context_block = get_or<bool>(prompt, "context_block", cfg.prompt.context_block, "prompt");
    cfg.prompt.context_limit = get_or<std::size_t>(prompt, "context_limit", cfg.prompt.context_limit, "prompt");
    cfg.prompt.max_command_length =
        get_or<std::size_t>(prompt, "max_command_length", cfg.prompt.max_command_length, "prompt");

    cfg.session_queue_depth = get_or<std::size_t>(root, "session_queue_depth", cfg.session_queue_depth, "config");

    const auto& api = section(root, "api");
    cfg.api.host = get_or<std::string>(api, "host", cfg.api.host, "api");
    cfg.api.port = get_or<int>(api, "port", cfg.api.port, "api");
    cfg.api.static_dir = resolve(base_dir, get_or<std::string>(api, "static_dir", "", "api"));

    const auto& sim = section(root, "simulator");
    cfg.simulator.actuation_delay = std::chrono::milliseconds{
        get_or<std::int64_t>(sim, "actuation_delay_ms", cfg.simulator.actuation_delay.count(), "simulator")};
    cfg.simulator.seed = get_or<std::uint64_t>(sim, "seed", cfg.simulator.seed, "simulator");
    if (sim.contains("devices")) {
        if (!sim["devices"].is_object()) fail("simulator.devices must be an object keyed by device id");
        for (const auto& [id, item] : sim["devices"].items()) {
            auto where = "simulator.devices." + id;
            if (!item.is_object()) fail(where + " must be an object");
            SimDeviceOverride o;
            if (item.contains("initial")) o.initial_value = get_or<std::string>(item, "initial", "", where);
            if (item.contains("actuation_delay_ms")) {
                o.actuation_delay = std::chrono::milliseconds{get_or<std::int64_t>(item, "actuation_delay_ms", 0, where)};
            }
            o.drop_probability = get_or<double>(item, "drop_probability", 0.0, where);
            o.ack_delay_jitter = std::chrono::milliseconds{get_or<std::int64_t>(item, "ack_delay_jitter_ms", 0, where)};
            cfg.simulator.devices.emplace(id, o);
        }
    }

    cfg.validate();
    return cfg;
}

GatewayConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail("cannot read config " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    try {
        return parse_config(buf.str(), path.parent_path());
    } catch (const Error& e) {
        throw Error(e.code(), path.string() + ": " + e.what());
    }
}

std::filesystem::path resolve_config_path(const std::optional<std::string>& cli_value) {
    if (cli_value && !cli_value->empty()) return *cli_value;
    if (const char* env = std::getenv("EDGETALK_CONFIG"); env != nullptr && *env != '\0') return env;
    fail("no config given: pass --config or set EDGETALK_CONFIG");
}

} // namespace edgetalk
