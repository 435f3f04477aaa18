#include "doctest.h"
#include "helpers.hpp"

#include "edgetalk/simulator.hpp"

using namespace edgetalk;
using namespace std::chrono_literals;
using json = nlohmann::json;

namespace {

std::vector<SimDeviceConfig> sim_room(std::chrono::milliseconds delay = 50ms) {
    std::vector<SimDeviceConfig> out;
    for (auto d : testutil::room()) {
        SimDeviceConfig c;
        c.descriptor = d;
        c.actuation_delay = delay;
        c.initial_value = "off";
        out.push_back(c);
    }
    return out;
}

BrokerConfig at(const mqtt::Broker& b) {
    BrokerConfig c;
    c.port = b.port();
    c.backoff_initial = 50ms;
    return c;
}

struct Controller {
    explicit Controller(const mqtt::Broker& broker) {
        mqtt::ClientOptions o;
        o.port = broker.port();
        o.client_id = "controller";
        client = std::make_unique<mqtt::Client>(o);
        client->set_message_handler([this](const mqtt::Message& m) {
            std::lock_guard lock(mutex);
            statuses.push_back(m);
        });
        client->subscribe("home/+/status", 1);
        client->start();
        REQUIRE(client->wait_connected(5s));
    }
    std::vector<mqtt::Message> seen() {
        std::lock_guard lock(mutex);
        return statuses;
    }
    std::unique_ptr<mqtt::Client> client;
    std::mutex mutex;
    std::vector<mqtt::Message> statuses;
};

} // namespace

TEST_CASE("command is applied after the actuation delay and reported retained") {
    mqtt::Broker broker;
    broker.start();
    Fleet fleet(sim_room(100ms), at(broker));
    fleet.start();
    REQUIRE(fleet.wait_connected(5s));
    Controller ctl(broker);
    // Initial states arrive as retained messages.
    REQUIRE(testutil::wait_until([&] { return ctl.seen().size() >= 3; }));
    CHECK(ctl.seen()[0].retain);

    auto sent = std::chrono::steady_clock::now();
    ctl.client->publish("home/tv/command", "on", 1);
    REQUIRE(fleet.wait_for({{"tv", "on"}}, 2s));
    auto took = std::chrono::steady_clock::now() - sent;
    CHECK(took >= 100ms);
    CHECK(took < 1s);
    CHECK(fleet.commands_received("tv") == 1);

    REQUIRE(testutil::wait_until([&] { return ctl.seen().size() >= 4; }));
    auto last = ctl.seen().back();
    CHECK(last.topic == "home/tv/status");
    auto doc = json::parse(last.payload);
    CHECK(doc["value"] == "on");
    CHECK(doc["ts"].is_number_integer());
}

TEST_CASE("unsupported commands republish the unchanged state") {
    mqtt::Broker broker;
    broker.start();
    Fleet fleet(sim_room(10ms), at(broker));
    fleet.start();
    REQUIRE(fleet.wait_connected(5s));
    Controller ctl(broker);
    REQUIRE(testutil::wait_until([&] { return ctl.seen().size() >= 3; }));
    auto before = fleet.status_publishes("light");

    ctl.client->publish("home/light/command", "dim", 1);
    REQUIRE(testutil::wait_until([&] { return fleet.status_publishes("light") == before + 1; }));
    CHECK(fleet.fleet_state().at("light") == "off");
    CHECK(json::parse(ctl.seen().back().payload)["value"] == "off");

    ctl.client->publish("home/light/command", "ON", 1); // folded
    CHECK(fleet.wait_for({{"light", "on"}}, 2s));
}

TEST_CASE("reset forces states and drops pending commands") {
    mqtt::Broker broker;
    broker.start();
    Fleet fleet(sim_room(300ms), at(broker));
    fleet.start();
    REQUIRE(fleet.wait_connected(5s));
    Controller ctl(broker);
    ctl.client->publish("home/fan/command", "on", 1);
    REQUIRE(testutil::wait_until([&] { return fleet.commands_received("fan") == 1; }));
    fleet.reset({{"fan", "off"}, {"tv", "on"}});
    std::this_thread::sleep_for(500ms);
    auto state = fleet.fleet_state();
    CHECK(state.at("fan") == "off");
    CHECK(state.at("tv") == "on");
    CHECK_FALSE(fleet.wait_for({{"fan", "on"}}, 50ms));
}

TEST_CASE("dropped commands never change state") {
    mqtt::Broker broker;
    broker.start();
    auto devices = sim_room(5ms);
    devices[0].fault = SimFault{1.0, 0ms};
    Fleet fleet(devices, at(broker));
    fleet.start();
    REQUIRE(fleet.wait_connected(5s));
    Controller ctl(broker);
    ctl.client->publish("home/light/command", "on", 1);
    REQUIRE(testutil::wait_until([&] { return fleet.commands_received("light") == 1; }));
    std::this_thread::sleep_for(100ms);
    CHECK(fleet.fleet_state().at("light") == "off");
}

TEST_CASE("fleet from config") {
    GatewayConfig c;
    c.devices = testutil::room();
    c.devices.push_back(testutil::device("temp", DeviceKind::sensor, {}, "°C"));
    c.simulator.actuation_delay = 20ms;
    SimDeviceOverride o;
    o.initial_value = "on";
    o.actuation_delay = 5ms;
    c.simulator.devices["tv"] = o;
    auto fleet = fleet_from_config(c);
    REQUIRE(fleet.size() == 4);
    CHECK(fleet[0].initial_value == "off");
    CHECK(fleet[0].actuation_delay == 20ms);
    CHECK(fleet[1].initial_value == "on");
    CHECK(fleet[1].actuation_delay == 5ms);
    CHECK(fleet[3].initial_value == "unknown");

    SimDeviceConfig bad;
    bad.descriptor = testutil::device("light", DeviceKind::light);
    bad.actuation_delay = -1ms;
    CHECK_THROWS_AS(bad.validate(), Error);
    bad.actuation_delay = 1ms;
    bad.initial_value = "purple";
    CHECK_THROWS_AS(bad.validate(), Error);
}
