#include "edgetalk/registry.hpp"

#include <algorithm>
#include <set>

namespace edgetalk {

std::string_view to_string(UpdateOutcome outcome) {
    switch (outcome) {
    case UpdateOutcome::applied: return "applied";
    case UpdateOutcome::duplicate: return "duplicate";
    case UpdateOutcome::stale: return "stale";
    case UpdateOutcome::unknown_device: return "unknown_device";
    case UpdateOutcome::rejected_value: return "rejected_value";
    }
    return "applied";
}

Registry::Registry(TopicScheme scheme) : scheme_(std::move(scheme)) {}

void Registry::register_device(DeviceDescriptor descriptor) {
    if (!is_valid_device_id(descriptor.id)) {
        throw Error(ErrorCode::malformed_id, "malformed device id: '" + descriptor.id + "'");
    }
    if (is_actuator(descriptor.kind) && descriptor.capabilities.empty()) {
        throw Error(ErrorCode::invalid_argument, "actuator '" + descriptor.id + "' has no capabilities");
    }
    std::set<std::string> seen;
    for (const auto& cap : descriptor.capabilities) {
        if (cap.empty() || !seen.insert(cap).second) {
            throw Error(ErrorCode::invalid_argument, "device '" + descriptor.id + "' has an empty or repeated capability");
        }
    }
    auto status = scheme_.status_topic(descriptor.id);
    auto command = scheme_.command_topic(descriptor.id);
    if (!descriptor.status_topic.empty() && descriptor.status_topic != status) {
        throw Error(ErrorCode::invalid_argument, "status topic '" + descriptor.status_topic + "' does not match scheme ('" + status + "')");
    }
    if (!descriptor.command_topic.empty() && descriptor.command_topic != command) {
        throw Error(ErrorCode::invalid_argument, "command topic '" + descriptor.command_topic + "' does not match scheme ('" + command + "')");
    }
    descriptor.status_topic = std::move(status);
    descriptor.command_topic = std::move(command);

    std::unique_lock lock(mutex_);
    if (index_.count(descriptor.id) != 0) {
        throw Error(ErrorCode::duplicate_id, "device '" + descriptor.id + "' is already registered");
    }
    DeviceState initial;
    initial.device_id = descriptor.id;
    initial.unit = descriptor.unit;
    index_.emplace(descriptor.id, entries_.size());
    entries_.push_back(Entry{std::move(descriptor), std::move(initial)});
}

std::vector<DeviceDescriptor> Registry::list_devices() const {
    std::shared_lock lock(mutex_);
    std::vector<DeviceDescriptor> out;
    out.reserve(entries_.size());
    for (const auto& e : entries_) out.push_back(e.descriptor);
    return out;
}

std::optional<DeviceDescriptor> Registry::find(std::string_view device_id) const {
    std::shared_lock lock(mutex_);
    auto it = index_.find(device_id);
    if (it == index_.end()) return std::nullopt;
    return entries_[it->second].descriptor;
}

std::optional<DeviceState> Registry::state(std::string_view device_id) const {
    std::shared_lock lock(mutex_);
    auto it = index_.find(device_id);
    if (it == index_.end()) return std::nullopt;
    return entries_[it->second].state;
}

UpdateResult Registry::apply_status_update(std::string_view device_id, const StateValue& value, Timestamp timestamp,
                                           StateSource source) {
    std::unique_lock lock(mutex_);
    auto it = index_.find(device_id);
    if (it == index_.end()) {
        ++counters_.unknown_device;
        return {UpdateOutcome::unknown_device, DeviceState{}};
    }
    auto& entry = entries_[it->second];
    auto& current = entry.state;

    if (is_actuator(entry.descriptor.kind) && value.value != kUnknownValue && !entry.descriptor.accepts(value.value)) {
        ++counters_.rejected_value;
        return {UpdateOutcome::rejected_value, current};
    }
    // The initial placeholder carries no timestamp, anything replaces it.
    if (current.source != StateSource::initial && timestamp < current.updated_at) {
        ++counters_.stale;
        return {UpdateOutcome::stale, current};
    }

    DeviceState next = current;
    next.value = value.value;
    next.numeric = value.numeric;
    next.unit = value.unit.empty() ? entry.descriptor.unit : value.unit;
    next.updated_at = timestamp;
    next.source = source;
    if (next == current) {
        ++counters_.duplicates;
        return {UpdateOutcome::duplicate, current};
    }
    current = std::move(next);
    ++counters_.applied;
    for (const auto& [token, listener] : listeners_) listener(current);
    return {UpdateOutcome::applied, current};
}

StateSnapshot Registry::snapshot() const {
    std::shared_lock lock(mutex_);
    StateSnapshot snap;
    snap.taken_at = now_ms();
    snap.states.reserve(entries_.size());
    for (const auto& e : entries_) snap.states.push_back(e.state);
    return snap;
}

RegistryCounters Registry::counters() const {
    std::shared_lock lock(mutex_);
    return counters_;
}

std::size_t Registry::add_listener(Listener listener) {
    std::unique_lock lock(mutex_);
    auto token = next_listener_++;
    listeners_.emplace(token, std::move(listener));
    return token;
}

void Registry::remove_listener(std::size_t token) {
    std::unique_lock lock(mutex_);
    listeners_.erase(token);
}

} // namespace edgetalk
