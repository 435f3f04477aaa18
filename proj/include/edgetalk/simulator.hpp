#pragma once

#include "edgetalk/config.hpp"
#include "edgetalk/device.hpp"
#include "edgetalk/mqtt.hpp"
#include "edgetalk/transport.hpp"

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

namespace edgetalk {

struct SimFault {
    double drop_probability = 0;                  // in [0,1]
    std::chrono::milliseconds ack_delay_jitter{0}; // extra delay drawn from [0, jitter]
};

struct SimDeviceConfig {
    DeviceDescriptor descriptor;
    std::chrono::milliseconds actuation_delay{50};
    std::string initial_value{kUnknownValue};
    std::optional<SimFault> fault;

    void validate() const; // config_error
};

// Catalog section of a gateway config turned into simulated devices.
std::vector<SimDeviceConfig> fleet_from_config(const GatewayConfig& config);

// Virtual devices on an MQTT broker. Each device has its own client and its
// own worker: a command is applied after the actuation delay (if the device
// supports it) and the resulting state is published, retained, as
// {"value": ..., "ts": <ms>}. Unsupported commands re-publish the current
// state unchanged.
class Fleet {
public:
    Fleet(std::vector<SimDeviceConfig> devices, BrokerConfig broker, TopicScheme scheme = TopicScheme{},
          std::uint64_t seed = 1);
    ~Fleet();
    Fleet(const Fleet&) = delete;
    Fleet& operator=(const Fleet&) = delete;

    // Connects every device and publishes its initial state.
    void start();
    void stop();
    bool wait_connected(std::chrono::milliseconds timeout) const;

    std::map<std::string, std::string> fleet_state() const;

    // Forces states (pending commands are discarded) and publishes them.
    void reset(const std::map<std::string, std::string>& states);

    // Blocks until every listed device holds the given value.
    bool wait_for(const std::map<std::string, std::string>& expected, std::chrono::milliseconds timeout) const;

    std::size_t status_publishes(const std::string& device_id) const;
    std::size_t commands_received(const std::string& device_id) const;

private:
    struct Device;

    void worker(Device& device);
    void publish_status(Device& device, const std::string& value); // state_mutex_ held
    Device& get(const std::string& id) const;

    BrokerConfig broker_;
    TopicScheme scheme_;
    std::vector<std::unique_ptr<Device>> devices_;
    mutable std::mutex state_mutex_;
    mutable std::condition_variable state_cv_;
    bool running_ = false;
};

} // namespace edgetalk
