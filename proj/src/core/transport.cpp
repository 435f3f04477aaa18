#include "edgetalk/transport.hpp"

#include "json.hpp"

#include <algorithm>
#include <cctype>

namespace edgetalk {

void BrokerConfig::validate() const {
    if (port < 1 || port > 65535) throw Error(ErrorCode::config_error, "broker port out of range: " + std::to_string(port));
    if (qos != 0 && qos != 1) throw Error(ErrorCode::config_error, "broker qos must be 0 or 1");
    if (backoff_initial.count() <= 0 || backoff_initial > backoff_max) {
        throw Error(ErrorCode::config_error, "reconnect backoff must satisfy 0 < initial <= max");
    }
    if (keepalive_seconds < 0 || keepalive_seconds > 65535) throw Error(ErrorCode::config_error, "keepalive out of range");
    if (host.empty()) throw Error(ErrorCode::config_error, "broker host is empty");
}

mqtt::ClientOptions BrokerConfig::client_options(std::string client_id_override) const {
    mqtt::ClientOptions o;
    o.host = host;
    o.port = static_cast<std::uint16_t>(port);
    o.client_id = client_id_override.empty() ? client_id : std::move(client_id_override);
    o.keepalive = std::chrono::seconds{keepalive_seconds};
    o.backoff_initial = backoff_initial;
    o.backoff_max = backoff_max;
    return o;
}

StatusPayload decode_status_payload(std::string_view payload) {
    auto first = payload.find_first_not_of(" \t\r\n");
    if (first != std::string_view::npos && payload[first] == '{') {
        auto doc = nlohmann::json::parse(payload.begin(), payload.end(), nullptr, false);
        if (doc.is_discarded() || !doc.is_object() || !doc.contains("value")) {
            throw Error(ErrorCode::decode_error, "status JSON needs an object with a \"value\" field");
        }
        StatusPayload out;
        const auto& v = doc["value"];
        if (v.is_string()) {
            out.value = v.get<std::string>();
        } else if (v.is_number() || v.is_boolean()) {
            out.value = v.dump();
        } else {
            throw Error(ErrorCode::decode_error, "status \"value\" must be a string, number or boolean");
        }
        if (doc.contains("ts")) {
            if (!doc["ts"].is_number_integer()) throw Error(ErrorCode::decode_error, "status \"ts\" must be integer milliseconds");
            out.timestamp = from_millis(doc["ts"].get<std::int64_t>());
        }
        if (doc.contains("unit") && doc["unit"].is_string()) out.unit = doc["unit"].get<std::string>();
        return out;
    }
    return StatusPayload{std::string(payload), std::nullopt, {}};
}

std::string encode_command_payload(std::string_view action) {
    std::string out(action);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

Transport::Transport(BrokerConfig config, TopicScheme scheme, std::size_t offline_queue_limit)
    : config_(std::move(config)), scheme_(std::move(scheme)) {
    config_.validate();
    auto options = config_.client_options();
    options.offline_queue_limit = offline_queue_limit;
    client_ = std::make_unique<mqtt::Client>(std::move(options));
}

Transport::~Transport() { stop(); }

void Transport::subscribe_all(StatusHandler handler) {
    client_->set_message_handler([this, handler = std::move(handler)](const mqtt::Message& m) {
        auto parsed = scheme_.parse(m.topic);
        if (!parsed || parsed->direction != TopicDirection::status) return;
        handler(StatusEvent{parsed->device_id, m.payload, now_ms()});
    });
    client_->subscribe(scheme_.status_filter(), config_.qos);
}

void Transport::on_link_state(StateHandler handler) { client_->set_state_handler(std::move(handler)); }

void Transport::start() { client_->start(); }
void Transport::stop() { client_->stop(); }

void Transport::publish_command(const std::string& device_id, const std::string& action) {
    if (action.empty()) throw Error(ErrorCode::invalid_argument, "empty action for device '" + device_id + "'");
    client_->publish(scheme_.command_topic(device_id), encode_command_payload(action), config_.qos);
}

mqtt::LinkState Transport::state() const { return client_->state(); }

bool Transport::wait_connected(std::chrono::milliseconds timeout) const { return client_->wait_connected(timeout); }

} // namespace edgetalk
