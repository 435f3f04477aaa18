#pragma once

#include "edgetalk/device.hpp"
#include "edgetalk/mqtt.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <string>

namespace edgetalk {

struct BrokerConfig {
    std::string host = "127.0.0.1";
    int port = 1883;
    std::string client_id = "edgetalk-gateway";
    int keepalive_seconds = 30;
    int qos = 1;
    std::chrono::milliseconds backoff_initial{100};
    std::chrono::milliseconds backoff_max{5000};

    // Throws config_error when port is out of range, qos not in {0,1} or the
    // backoff bounds are inverted.
    void validate() const;
    mqtt::ClientOptions client_options(std::string client_id_override = {}) const;
};

// Anything that can deliver a command to a device. The reconciler depends on
// this, not on MQTT.
class CommandPublisher {
public:
    virtual ~CommandPublisher() = default;
    virtual void publish_command(const std::string& device_id, const std::string& action) = 0;
};

struct StatusEvent {
    std::string device_id;
    std::string payload;
    Timestamp received_at;
};

// Status payloads are either a bare string ("on") or a JSON object
// {"value": ..., "ts": <ms>, "unit": ...}.
struct StatusPayload {
    std::string value;
    std::optional<Timestamp> timestamp;
    std::string unit;
};

StatusPayload decode_status_payload(std::string_view payload);

// Command payloads are the bare action string, lowercase.
std::string encode_command_payload(std::string_view action);

class Transport : public CommandPublisher {
public:
    using StatusHandler = std::function<void(const StatusEvent&)>;
    using StateHandler = std::function<void(mqtt::LinkState)>;

    Transport(BrokerConfig config, TopicScheme scheme, std::size_t offline_queue_limit = 64);
    ~Transport() override;

    // Subscribes <prefix>/+/status; every status message, including ones for
    // devices nobody registered, is handed to `handler`.
    void subscribe_all(StatusHandler handler);
    void on_link_state(StateHandler handler);

    void start();
    void stop();

    void publish_command(const std::string& device_id, const std::string& action) override;

    mqtt::LinkState state() const;
    bool wait_connected(std::chrono::milliseconds timeout) const;
    mqtt::Client& client() { return *client_; }
    const TopicScheme& topics() const { return scheme_; }

private:
    BrokerConfig config_;
    TopicScheme scheme_;
    std::unique_ptr<mqtt::Client> client_;
};

} // namespace edgetalk
