#include "doctest.h"
#include "helpers.hpp"

#include "edgetalk/mqtt.hpp"
#include "edgetalk/transport.hpp"

#include <atomic>
#include <random>

using namespace edgetalk;
using testutil::wait_until;

namespace {

BrokerConfig broker_at(std::uint16_t port, const std::string& client_id) {
    BrokerConfig c;
    c.port = port;
    c.client_id = client_id;
    c.backoff_initial = std::chrono::milliseconds(50);
    c.backoff_max = std::chrono::milliseconds(200);
    return c;
}

// Collects everything a plain client receives.
struct Sniffer {
    explicit Sniffer(std::uint16_t port, const std::string& filter) {
        mqtt::ClientOptions o;
        o.port = port;
        o.client_id = "sniffer";
        o.backoff_initial = std::chrono::milliseconds(50);
        client = std::make_unique<mqtt::Client>(o);
        client->set_message_handler([this](const mqtt::Message& m) {
            std::lock_guard lock(mutex);
            got.push_back(m);
        });
        client->subscribe(filter, 1);
        client->start();
    }
    std::vector<mqtt::Message> messages() {
        std::lock_guard lock(mutex);
        return got;
    }
    std::unique_ptr<mqtt::Client> client;
    std::mutex mutex;
    std::vector<mqtt::Message> got;
};

} // namespace

TEST_CASE("topic scheme round trip") {
    TopicScheme s{"home"};
    for (std::string id : {"light", "tv", "fan", "living_room-2"}) {
        auto st = s.parse(s.status_topic(id));
        auto cmd = s.parse(s.command_topic(id));
        REQUIRE(st);
        REQUIRE(cmd);
        CHECK(st->device_id == id);
        CHECK(st->direction == TopicDirection::status);
        CHECK(cmd->device_id == id);
        CHECK(cmd->direction == TopicDirection::command);
    }
    CHECK(s.status_topic("tv") == "home/tv/status");
    CHECK_FALSE(s.parse("home/tv"));
    CHECK_FALSE(s.parse("office/tv/status"));
    CHECK_FALSE(s.parse("home/tv/status/extra"));
    CHECK_FALSE(s.parse("home/TV/status"));
    CHECK(s.status_filter() == "home/+/status");
}

TEST_CASE("topic filter matching") {
    CHECK(mqtt::topic_matches("home/+/status", "home/tv/status"));
    CHECK_FALSE(mqtt::topic_matches("home/+/status", "home/tv/command"));
    CHECK(mqtt::topic_matches("home/#", "home/tv/status"));
    CHECK(mqtt::topic_matches("#", "a/b/c"));
    CHECK_FALSE(mqtt::topic_matches("home/+", "home/tv/status"));
    CHECK(mqtt::valid_topic_filter("home/+/status"));
    CHECK_FALSE(mqtt::valid_topic_filter("home/#/status"));
    CHECK_FALSE(mqtt::valid_topic_filter("home/t+/status"));
}

TEST_CASE("packet codec round trips") {
    mqtt::Message m{"home/tv/command", "off", 1, true, false, 42};
    auto wire = mqtt::encode(mqtt::make_publish(m));
    std::string buf = wire.substr(0, 3);
    CHECK_FALSE(mqtt::try_decode(buf)); // incomplete
    buf = wire + mqtt::encode(mqtt::make_simple(mqtt::PacketType::pingreq));
    auto p = mqtt::try_decode(buf);
    REQUIRE(p);
    auto back = mqtt::parse_publish(*p);
    CHECK(back.topic == m.topic);
    CHECK(back.payload == m.payload);
    CHECK(back.qos == 1);
    CHECK(back.retain);
    CHECK(back.packet_id == 42);
    auto ping = mqtt::try_decode(buf);
    REQUIRE(ping);
    CHECK(ping->type == mqtt::PacketType::pingreq);
    CHECK(buf.empty());

    // Remaining-length over 127 needs a multi-byte length.
    m.payload.assign(20000, 'x');
    buf = mqtt::encode(mqtt::make_publish(m));
    auto big = mqtt::try_decode(buf);
    REQUIRE(big);
    CHECK(mqtt::parse_publish(*big).payload.size() == 20000);

    std::uint16_t id = 0;
    auto subs = mqtt::parse_subscribe(mqtt::make_subscribe(7, {{"home/+/status", 1}, {"a/#", 0}}), id);
    CHECK(id == 7);
    REQUIRE(subs.size() == 2);
    CHECK(subs[1].filter == "a/#");

    auto ci = mqtt::parse_connect(mqtt::make_connect({"gw", 30, true}));
    CHECK(ci.client_id == "gw");
    CHECK(ci.keepalive_seconds == 30);
}

TEST_CASE("status payload decoding") {
    CHECK(decode_status_payload("on").value == "on");
    auto j = decode_status_payload(R"({"value":"off","ts":1234,"unit":"C"})");
    CHECK(j.value == "off");
    REQUIRE(j.timestamp);
    CHECK(to_millis(*j.timestamp) == 1234);
    CHECK(j.unit == "C");
    CHECK(decode_status_payload(R"({"value":21.5})").value == "21.5");
    CHECK_THROWS_AS(decode_status_payload(R"({"state":"on"})"), Error);
    CHECK_THROWS_AS(decode_status_payload(R"({"value":"on","ts":"yesterday"})"), Error);
    CHECK(encode_command_payload("OFF") == "off");
}

TEST_CASE("command publish reaches the device command topic and status flows back") {
    mqtt::Broker broker;
    broker.start();
    Sniffer sniffer(broker.port(), "home/+/command");

    Transport t(broker_at(broker.port(), "gw-loop"), TopicScheme{"home"});
    std::mutex m;
    std::vector<StatusEvent> statuses;
    t.subscribe_all([&](const StatusEvent& e) {
        std::lock_guard lock(m);
        statuses.push_back(e);
    });
    t.start();
    REQUIRE(t.wait_connected(std::chrono::seconds(5)));
    REQUIRE(sniffer.client->wait_connected(std::chrono::seconds(5)));
    std::this_thread::sleep_for(std::chrono::milliseconds(100)); // let SUBSCRIBEs land

    t.publish_command("tv", "OFF");
    REQUIRE(wait_until([&] { return sniffer.messages().size() == 1; }));
    CHECK(sniffer.messages()[0].topic == "home/tv/command");
    CHECK(sniffer.messages()[0].payload == "off");

    sniffer.client->publish("home/tv/status", R"({"value":"off","ts":5})", 1);
    sniffer.client->publish("home/tv/command", "ignored", 1);
    REQUIRE(wait_until([&] {
        std::lock_guard lock(m);
        return !statuses.empty();
    }));
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
    std::lock_guard lock(m);
    REQUIRE(statuses.size() == 1);
    CHECK(statuses[0].device_id == "tv");
    CHECK(statuses[0].payload == R"({"value":"off","ts":5})");
}

TEST_CASE("client connects once a late broker comes up") {
    std::uint16_t port = 0;
    {
        mqtt::Broker probe;
        probe.start();
        port = probe.port();
    }
    Transport t(broker_at(port, "gw-late"), TopicScheme{});
    t.start();
    CHECK(t.state() != mqtt::LinkState::connected);
    // Queued while offline, delivered after connect.
    t.publish_command("light", "on");

    std::this_thread::sleep_for(std::chrono::seconds(2));
    mqtt::Broker broker("127.0.0.1", port);
    std::atomic<int> seen{0};
    broker.set_publish_observer([&](const mqtt::Message& msg) {
        if (msg.topic == "home/light/command") ++seen;
    });
    broker.start();
    REQUIRE(t.wait_connected(std::chrono::seconds(5)));
    CHECK(wait_until([&] { return seen.load() == 1; }));
}

TEST_CASE("forced reconnect keeps subscriptions") {
    mqtt::Broker broker;
    broker.start();
    Transport t(broker_at(broker.port(), "gw-reconnect"), TopicScheme{});
    std::atomic<int> got{0};
    t.subscribe_all([&](const StatusEvent&) { ++got; });
    t.start();
    REQUIRE(t.wait_connected(std::chrono::seconds(5)));
    auto epoch = t.client().connection_epoch();

    t.client().force_disconnect();
    REQUIRE(wait_until([&] { return t.client().connection_epoch() > epoch && t.state() == mqtt::LinkState::connected; }));
    std::this_thread::sleep_for(std::chrono::milliseconds(100));

    Sniffer pub(broker.port(), "unused/#");
    REQUIRE(pub.client->wait_connected(std::chrono::seconds(5)));
    pub.client->publish("home/fan/status", "on", 1);
    CHECK(wait_until([&] { return got.load() == 1; }));
}

TEST_CASE("offline queue is bounded") {
    std::uint16_t port = 0;
    {
        mqtt::Broker probe;
        probe.start();
        port = probe.port();
    }
    Transport t(broker_at(port, "gw-offline"), TopicScheme{}, 64);
    t.start();
    for (int i = 0; i < 64; ++i) t.publish_command("light", i % 2 ? "on" : "off");
    try {
        t.publish_command("light", "on");
        FAIL("expected backpressure");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::backpressure);
    }
    CHECK_THROWS_AS(t.publish_command("light", ""), Error);
}

TEST_CASE("commands never leak to other devices' topics") {
    mqtt::Broker broker;
    std::mutex m;
    std::vector<mqtt::Message> observed;
    broker.set_publish_observer([&](const mqtt::Message& msg) {
        std::lock_guard lock(m);
        observed.push_back(msg);
    });
    broker.start();
    Transport t(broker_at(broker.port(), "gw-xtalk"), TopicScheme{"home"});
    t.start();
    REQUIRE(t.wait_connected(std::chrono::seconds(5)));

    std::mt19937 rng(7);
    const std::vector<std::string> ids{"light", "tv", "fan", "heater", "blind_2"};
    std::vector<std::pair<std::string, std::string>> sent;
    for (int i = 0; i < 200; ++i) {
        auto id = ids[rng() % ids.size()];
        std::string action = rng() % 2 ? "on" : "off";
        t.publish_command(id, action);
        sent.emplace_back(id, action);
    }
    REQUIRE(wait_until([&] {
        std::lock_guard lock(m);
        return observed.size() == sent.size();
    }));
    std::lock_guard lock(m);
    for (std::size_t i = 0; i < sent.size(); ++i) {
        CHECK(observed[i].topic == "home/" + sent[i].first + "/command");
        CHECK(observed[i].payload == sent[i].second);
    }
}
