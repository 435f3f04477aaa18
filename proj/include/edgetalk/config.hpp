#pragma once

#include "edgetalk/backend.hpp"
#include "edgetalk/device.hpp"
#include "edgetalk/processing.hpp"
#include "edgetalk/transport.hpp"

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace edgetalk {

struct PromptSettings {
    bool context_block = false;
    std::size_t context_limit = 3;
    std::size_t max_command_length = kDefaultMaxCommandLength;
};

struct ApiSettings {
    std::string host = "127.0.0.1";
    int port = 8080;
    std::filesystem::path static_dir; // optional UI bundle served at /
};

struct SimDeviceOverride {
    std::optional<std::string> initial_value;
    std::optional<std::chrono::milliseconds> actuation_delay;
    double drop_probability = 0;
    std::chrono::milliseconds ack_delay_jitter{0};
};

struct SimulatorSettings {
    std::chrono::milliseconds actuation_delay{50};
    std::uint64_t seed = 1;
    std::map<std::string, SimDeviceOverride> devices;
};

struct GatewayConfig {
    BrokerConfig broker;
    std::string topic_prefix = "home";
    std::vector<DeviceDescriptor> devices;
    BackendConfig backend;
    std::filesystem::path history_path; // empty: in-memory history
    SynonymTable synonyms = SynonymTable::defaults();
    PromptSettings prompt;
    std::size_t session_queue_depth = 4;
    ApiSettings api;
    SimulatorSettings simulator;

    // Throws config_error: duplicate or malformed device ids, bad broker
    // settings, a history directory that cannot be created.
    void validate() const;
};

// Relative paths inside the document resolve against `base_dir`.
GatewayConfig parse_config(std::string_view json_text, const std::filesystem::path& base_dir = {});
GatewayConfig load_config(const std::filesystem::path& path);

// --config wins; otherwise EDGETALK_CONFIG; otherwise config_error.
std::filesystem::path resolve_config_path(const std::optional<std::string>& cli_value);

} // namespace edgetalk
