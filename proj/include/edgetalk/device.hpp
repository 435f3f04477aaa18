#pragma once

#include "edgetalk/error.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace edgetalk {

enum class DeviceKind { light, fan, tv, sensor, other };

std::string_view to_string(DeviceKind kind);
DeviceKind parse_device_kind(std::string_view text);

inline bool is_actuator(DeviceKind kind) { return kind != DeviceKind::sensor; }

// Ids are short lowercase identifiers: [a-z0-9_-]+
bool is_valid_device_id(std::string_view id);

inline constexpr std::string_view kUnknownValue = "unknown";

struct DeviceDescriptor {
    std::string id;
    DeviceKind kind = DeviceKind::other;
    std::vector<std::string> capabilities;
    std::string status_topic;
    std::string command_topic;
    // Default unit for numeric readings of sensor devices; empty for actuators.
    std::string unit;

    bool accepts(std::string_view action) const;
};

// ---------------------------------------------------------------------------
// TopicScheme: <prefix>/<id>/status and <prefix>/<id>/command.
// ---------------------------------------------------------------------------
enum class TopicDirection { status, command };

struct ParsedTopic {
    std::string device_id;
    TopicDirection direction;

    bool operator==(const ParsedTopic&) const = default;
};

class TopicScheme {
public:
    explicit TopicScheme(std::string prefix = "home");

    const std::string& prefix() const { return prefix_; }

    std::string status_topic(std::string_view device_id) const;
    std::string command_topic(std::string_view device_id) const;
    std::optional<ParsedTopic> parse(std::string_view topic) const;

    // Wildcard subscription covering every device's status topic.
    std::string status_filter() const { return prefix_ + "/+/status"; }

private:
    std::string prefix_;
};

enum class StateSource { initial, status_message, assumed_after_command };

std::string_view to_string(StateSource source);
StateSource parse_state_source(std::string_view text);

struct DeviceState {
    std::string device_id;
    std::string value{kUnknownValue};
    std::optional<double> numeric;
    std::string unit;
    Timestamp updated_at{};
    StateSource source = StateSource::initial;

    // Value as it appears in prompts: "on", or "23.5 °C" for readings with a unit.
    std::string display() const;

    bool operator==(const DeviceState&) const = default;
};

// Point-in-time copy of every registered device, in registration order.
struct StateSnapshot {
    Timestamp taken_at{};
    std::vector<DeviceState> states;

    const DeviceState* find(std::string_view device_id) const;
    std::vector<std::pair<std::string, std::string>> values() const;
    bool empty() const { return states.empty(); }
};

} // namespace edgetalk
