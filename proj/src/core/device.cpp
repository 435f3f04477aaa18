#include "edgetalk/device.hpp"

#include <algorithm>

namespace edgetalk {

std::string_view to_string(DeviceKind kind) {
    switch (kind) {
    case DeviceKind::light: return "light";
    case DeviceKind::fan: return "fan";
    case DeviceKind::tv: return "tv";
    case DeviceKind::sensor: return "sensor";
    case DeviceKind::other: return "other";
    }
    return "other";
}

DeviceKind parse_device_kind(std::string_view text) {
    if (text == "light") return DeviceKind::light;
    if (text == "fan") return DeviceKind::fan;
    if (text == "tv") return DeviceKind::tv;
    if (text == "sensor") return DeviceKind::sensor;
    if (text == "other") return DeviceKind::other;
    throw Error(ErrorCode::invalid_argument, "unknown device kind: " + std::string(text));
}

bool is_valid_device_id(std::string_view id) {
    if (id.empty()) return false;
    return std::all_of(id.begin(), id.end(), [](char c) {
        return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_' || c == '-';
    });
}

bool DeviceDescriptor::accepts(std::string_view action) const {
    return std::find(capabilities.begin(), capabilities.end(), action) != capabilities.end();
}

TopicScheme::TopicScheme(std::string prefix) : prefix_(std::move(prefix)) {
    if (prefix_.empty() || prefix_.find_first_of("+#") != std::string::npos ||
        prefix_.front() == '/' || prefix_.back() == '/') {
        throw Error(ErrorCode::invalid_argument, "invalid topic prefix: '" + prefix_ + "'");
    }
}

std::string TopicScheme::status_topic(std::string_view device_id) const {
    if (!is_valid_device_id(device_id)) {
        throw Error(ErrorCode::malformed_id, "malformed device id: '" + std::string(device_id) + "'");
    }
    return prefix_ + "/" + std::string(device_id) + "/status";
}

std::string TopicScheme::command_topic(std::string_view device_id) const {
    if (!is_valid_device_id(device_id)) {
        throw Error(ErrorCode::malformed_id, "malformed device id: '" + std::string(device_id) + "'");
    }
    return prefix_ + "/" + std::string(device_id) + "/command";
}

std::optional<ParsedTopic> TopicScheme::parse(std::string_view topic) const {
    if (topic.size() <= prefix_.size() + 1 || topic.substr(0, prefix_.size()) != prefix_ ||
        topic[prefix_.size()] != '/') {
        return std::nullopt;
    }
    auto rest = topic.substr(prefix_.size() + 1);
    auto slash = rest.find('/');
    if (slash == std::string_view::npos) return std::nullopt;
    auto id = rest.substr(0, slash);
    auto tail = rest.substr(slash + 1);
    if (!is_valid_device_id(id)) return std::nullopt;
    if (tail == "status") return ParsedTopic{std::string(id), TopicDirection::status};
    if (tail == "command") return ParsedTopic{std::string(id), TopicDirection::command};
    return std::nullopt;
}

std::string_view to_string(StateSource source) {
    switch (source) {
    case StateSource::initial: return "initial";
    case StateSource::status_message: return "status_message";
    case StateSource::assumed_after_command: return "assumed_after_command";
    }
    return "initial";
}

StateSource parse_state_source(std::string_view text) {
    if (text == "initial") return StateSource::initial;
    if (text == "status_message") return StateSource::status_message;
    if (text == "assumed_after_command") return StateSource::assumed_after_command;
    throw Error(ErrorCode::invalid_argument, "unknown state source: " + std::string(text));
}

std::string DeviceState::display() const {
    if (unit.empty()) return value;
    return value + " " + unit;
}

const DeviceState* StateSnapshot::find(std::string_view device_id) const {
    for (const auto& s : states) {
        if (s.device_id == device_id) return &s;
    }
    return nullptr;
}

std::vector<std::pair<std::string, std::string>> StateSnapshot::values() const {
    std::vector<std::pair<std::string, std::string>> out;
    out.reserve(states.size());
    for (const auto& s : states) out.emplace_back(s.device_id, s.display());
    return out;
}

} // namespace edgetalk
