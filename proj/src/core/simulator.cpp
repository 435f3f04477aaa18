#include "edgetalk/simulator.hpp"

#include "json.hpp"

#include <spdlog/spdlog.h>

namespace edgetalk {

void SimDeviceConfig::validate() const {
    if (!is_valid_device_id(descriptor.id)) throw Error(ErrorCode::config_error, "malformed device id '" + descriptor.id + "'");
    if (actuation_delay.count() < 0) throw Error(ErrorCode::config_error, descriptor.id + ": negative actuation delay");
    if (initial_value != kUnknownValue && is_actuator(descriptor.kind) && !descriptor.accepts(initial_value)) {
        throw Error(ErrorCode::config_error, descriptor.id + ": initial value '" + initial_value + "' not in capabilities");
    }
    if (fault) {
        if (fault->drop_probability < 0 || fault->drop_probability > 1) {
            throw Error(ErrorCode::config_error, descriptor.id + ": drop_probability must be in [0,1]");
        }
        if (fault->ack_delay_jitter.count() < 0) throw Error(ErrorCode::config_error, descriptor.id + ": negative jitter");
    }
}

std::vector<SimDeviceConfig> fleet_from_config(const GatewayConfig& config) {
    TopicScheme scheme(config.topic_prefix);
    std::vector<SimDeviceConfig> out;
    for (auto d : config.devices) {
        if (d.status_topic.empty()) d.status_topic = scheme.status_topic(d.id);
        if (d.command_topic.empty()) d.command_topic = scheme.command_topic(d.id);
        SimDeviceConfig sim;
        sim.descriptor = d;
        sim.actuation_delay = config.simulator.actuation_delay;
        sim.initial_value = !d.capabilities.empty() && d.accepts("off") ? "off" : std::string(kUnknownValue);
        if (auto it = config.simulator.devices.find(d.id); it != config.simulator.devices.end()) {
            const auto& o = it->second;
            if (o.initial_value) sim.initial_value = *o.initial_value;
            if (o.actuation_delay) sim.actuation_delay = *o.actuation_delay;
            if (o.drop_probability > 0 || o.ack_delay_jitter.count() > 0) {
                sim.fault = SimFault{o.drop_probability, o.ack_delay_jitter};
            }
        }
        sim.validate();
        out.push_back(std::move(sim));
    }
    return out;
}

struct Fleet::Device {
    SimDeviceConfig config;
    std::unique_ptr<mqtt::Client> client;
    std::mt19937_64 rng;
    std::thread thread;

    // Guarded by Fleet::state_mutex_.
    std::string value;
    std::deque<std::string> commands;
    std::size_t publishes = 0;
    std::size_t received = 0;
    std::uint64_t generation = 0; // bumped by reset; cancels in-flight commands
};

Fleet::Fleet(std::vector<SimDeviceConfig> devices, BrokerConfig broker, TopicScheme scheme, std::uint64_t seed)
    : broker_(std::move(broker)), scheme_(std::move(scheme)) {
    broker_.validate();
    std::uint64_t index = 0;
    for (auto& cfg : devices) {
        cfg.validate();
        if (cfg.descriptor.command_topic.empty()) cfg.descriptor.command_topic = scheme_.command_topic(cfg.descriptor.id);
        if (cfg.descriptor.status_topic.empty()) cfg.descriptor.status_topic = scheme_.status_topic(cfg.descriptor.id);
        auto d = std::make_unique<Device>();
        d->value = cfg.initial_value;
        d->rng.seed(seed + index++);
        d->config = std::move(cfg);
        d->client = std::make_unique<mqtt::Client>(broker_.client_options("edgetalk-sim-" + d->config.descriptor.id));
        devices_.push_back(std::move(d));
    }
}

Fleet::~Fleet() { stop(); }

void Fleet::start() {
    {
        std::lock_guard lock(state_mutex_);
        if (running_) return;
        running_ = true;
    }
    for (auto& dp : devices_) {
        auto& d = *dp;
        d.client->set_message_handler([this, &d](const mqtt::Message& m) {
            {
                std::lock_guard lock(state_mutex_);
                d.commands.push_back(m.payload);
                ++d.received;
            }
            state_cv_.notify_all();
        });
        d.client->subscribe(d.config.descriptor.command_topic, broker_.qos);
        d.client->start();
        {
            std::lock_guard lock(state_mutex_);
            if (d.value != kUnknownValue) publish_status(d, d.value);
        }
        d.thread = std::thread([this, &d] { worker(d); });
    }
}

void Fleet::stop() {
    {
        std::lock_guard lock(state_mutex_);
        if (!running_) return;
        running_ = false;
    }
    state_cv_.notify_all();
    for (auto& d : devices_) {
        if (d->thread.joinable()) d->thread.join();
        d->client->stop();
    }
}

bool Fleet::wait_connected(std::chrono::milliseconds timeout) const {
    auto deadline = std::chrono::steady_clock::now() + timeout;
    for (const auto& d : devices_) {
        auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
        if (left.count() < 0 || !d->client->wait_connected(left)) return false;
    }
    return true;
}

void Fleet::worker(Device& d) {
    std::unique_lock lock(state_mutex_);
    while (true) {
        state_cv_.wait(lock, [&] { return !running_ || !d.commands.empty(); });
        if (!running_) return;
        auto command = fold_word(d.commands.front());
        d.commands.pop_front();
        auto generation = d.generation;

        auto delay = d.config.actuation_delay;
        bool drop = false;
        if (d.config.fault) {
            const auto& f = *d.config.fault;
            drop = std::bernoulli_distribution(f.drop_probability)(d.rng);
            if (f.ack_delay_jitter.count() > 0) {
                delay += std::chrono::milliseconds{
                    std::uniform_int_distribution<std::int64_t>(0, f.ack_delay_jitter.count())(d.rng)};
            }
        }
        if (drop) {
            spdlog::debug("sim {}: dropped command '{}'", d.config.descriptor.id, command);
            continue;
        }
        auto until = std::chrono::steady_clock::now() + delay;
        state_cv_.wait_until(lock, until, [&] { return !running_; });
        if (!running_) return;
        if (generation != d.generation) continue;
        if (d.config.descriptor.accepts(command)) d.value = command;
        publish_status(d, d.value);
        state_cv_.notify_all();
    }
}

// Caller holds state_mutex_, so the value and its timestamp go out in the same
// order as the state changes they describe. Client::publish only queues.
void Fleet::publish_status(Device& d, const std::string& value) {
    nlohmann::json payload{{"value", value}, {"ts", to_millis(now_ms())}};
    try {
        d.client->publish(d.config.descriptor.status_topic, payload.dump(), broker_.qos, true);
        ++d.publishes;
    } catch (const Error& e) {
        spdlog::warn("sim {}: status publish failed: {}", d.config.descriptor.id, e.what());
    }
}

Fleet::Device& Fleet::get(const std::string& id) const {
    for (const auto& d : devices_) {
        if (d->config.descriptor.id == id) return *d;
    }
    throw Error(ErrorCode::unknown_device, "no simulated device '" + id + "'");
}

std::map<std::string, std::string> Fleet::fleet_state() const {
    std::lock_guard lock(state_mutex_);
    std::map<std::string, std::string> out;
    for (const auto& d : devices_) out[d->config.descriptor.id] = d->value;
    return out;
}

void Fleet::reset(const std::map<std::string, std::string>& states) {
    {
        std::lock_guard lock(state_mutex_);
        for (const auto& [id, value] : states) {
            auto& d = get(id);
            if (value != kUnknownValue && is_actuator(d.config.descriptor.kind) && !d.config.descriptor.accepts(value)) {
                throw Error(ErrorCode::invalid_argument, id + " cannot hold '" + value + "'");
            }
        }
        for (const auto& [id, value] : states) {
            auto& d = get(id);
            d.commands.clear();
            ++d.generation;
            d.value = value;
            publish_status(d, value);
        }
    }
    state_cv_.notify_all();
}

bool Fleet::wait_for(const std::map<std::string, std::string>& expected, std::chrono::milliseconds timeout) const {
    for (const auto& [id, value] : expected) get(id);
    std::unique_lock lock(state_mutex_);
    return state_cv_.wait_for(lock, timeout, [&] {
        for (const auto& [id, value] : expected) {
            if (get(id).value != value) return false;
        }
        return true;
    });
}

std::size_t Fleet::status_publishes(const std::string& device_id) const {
    std::lock_guard lock(state_mutex_);
    return get(device_id).publishes;
}

std::size_t Fleet::commands_received(const std::string& device_id) const {
    std::lock_guard lock(state_mutex_);
    return get(device_id).received;
}

} // namespace edgetalk
