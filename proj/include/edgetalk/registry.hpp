#pragma once

#include "edgetalk/device.hpp"

#include <cstddef>
#include <functional>
#include <map>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <vector>

namespace edgetalk {

// Value carried by a status update once it has been normalized.
struct StateValue {
    std::string value;
    std::optional<double> numeric;
    std::string unit;
};

enum class UpdateOutcome {
    applied,
    duplicate,      // same value and timestamp as the current state
    stale,          // older than the current state; dropped
    unknown_device, // not registered; dropped
    rejected_value, // actuator value outside its capability set
};

std::string_view to_string(UpdateOutcome outcome);

struct UpdateResult {
    UpdateOutcome outcome;
    DeviceState state; // state after the call (empty for unknown_device)
};

struct RegistryCounters {
    std::size_t applied = 0;
    std::size_t duplicates = 0;
    std::size_t stale = 0;
    std::size_t unknown_device = 0;
    std::size_t rejected_value = 0;
};

// Device catalog plus live last-known state.
//
// Writers are serialized; snapshot() returns an independent copy. Listeners are
// invoked synchronously, in update order, while the write lock is held, so they
// must not call back into the registry.
class Registry {
public:
    using Listener = std::function<void(const DeviceState&)>;

    explicit Registry(TopicScheme scheme = TopicScheme{});

    const TopicScheme& topics() const { return scheme_; }

    // Fills in empty topics from the scheme; rejects topics that diverge from it.
    void register_device(DeviceDescriptor descriptor);

    std::vector<DeviceDescriptor> list_devices() const;
    std::optional<DeviceDescriptor> find(std::string_view device_id) const;
    std::optional<DeviceState> state(std::string_view device_id) const;

    UpdateResult apply_status_update(std::string_view device_id, const StateValue& value, Timestamp timestamp,
                                     StateSource source = StateSource::status_message);

    StateSnapshot snapshot() const;
    RegistryCounters counters() const;

    std::size_t add_listener(Listener listener);
    void remove_listener(std::size_t token);

private:
    struct Entry {
        DeviceDescriptor descriptor;
        DeviceState state;
    };

    TopicScheme scheme_;
    mutable std::shared_mutex mutex_;
    std::vector<Entry> entries_; // registration order
    std::map<std::string, std::size_t, std::less<>> index_;
    RegistryCounters counters_;
    std::map<std::size_t, Listener> listeners_;
    std::size_t next_listener_ = 1;
};

} // namespace edgetalk
