#include "doctest.h"
#include "helpers.hpp"

#include "edgetalk/registry.hpp"

#include <thread>

using namespace edgetalk;
using testutil::device;

namespace {

StateValue v(const std::string& s) { return {s, std::nullopt, {}}; }

} // namespace

TEST_CASE("registration fills topics from the scheme") {
    Registry reg{TopicScheme{"home"}};
    reg.register_device(device("light", DeviceKind::light));
    auto d = reg.find("light");
    REQUIRE(d);
    CHECK(d->status_topic == "home/light/status");
    CHECK(d->command_topic == "home/light/command");
    CHECK(reg.state("light")->value == "unknown");
    CHECK(reg.state("light")->source == StateSource::initial);
}

TEST_CASE("registration errors") {
    Registry reg;
    reg.register_device(device("light", DeviceKind::light));
    CHECK_THROWS_AS(reg.register_device(device("light", DeviceKind::light)), Error);
    try {
        reg.register_device(device("light", DeviceKind::light));
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::duplicate_id);
    }
    try {
        reg.register_device(device("Living Room", DeviceKind::light));
        FAIL("expected malformed_id");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::malformed_id);
    }
    auto bad = device("lamp", DeviceKind::light);
    bad.status_topic = "other/lamp/status";
    CHECK_THROWS_AS(reg.register_device(bad), Error);
    CHECK_THROWS_AS(reg.register_device(device("lamp2", DeviceKind::light, {})), Error);
    CHECK(reg.list_devices().size() == 1);
}

TEST_CASE("timestamps are monotonic per device") {
    Registry reg;
    testutil::fill(reg, testutil::room());
    auto t0 = from_millis(1'000);

    CHECK(reg.apply_status_update("light", v("on"), t0).outcome == UpdateOutcome::applied);
    CHECK(reg.apply_status_update("light", v("off"), t0 - std::chrono::milliseconds(1)).outcome == UpdateOutcome::stale);
    CHECK(reg.state("light")->value == "on");

    // Same timestamp: the later arrival wins.
    CHECK(reg.apply_status_update("light", v("off"), t0).outcome == UpdateOutcome::applied);
    CHECK(reg.state("light")->value == "off");
    CHECK(reg.apply_status_update("light", v("off"), t0).outcome == UpdateOutcome::duplicate);

    // Other devices are independent.
    CHECK(reg.apply_status_update("tv", v("on"), from_millis(10)).outcome == UpdateOutcome::applied);

    auto c = reg.counters();
    CHECK(c.applied == 3);
    CHECK(c.stale == 1);
    CHECK(c.duplicates == 1);
}

TEST_CASE("unknown devices and out-of-capability values are dropped and counted") {
    Registry reg;
    testutil::fill(reg, testutil::room());
    CHECK(reg.apply_status_update("heater", v("on"), now_ms()).outcome == UpdateOutcome::unknown_device);
    CHECK(reg.apply_status_update("light", v("dim"), now_ms()).outcome == UpdateOutcome::rejected_value);
    CHECK(reg.state("light")->value == "unknown");
    CHECK(reg.counters().unknown_device == 1);
    CHECK(reg.counters().rejected_value == 1);
    CHECK(reg.list_devices().size() == 3);
}

TEST_CASE("sensor readings keep numeric value and unit") {
    Registry reg;
    reg.register_device(device("temp", DeviceKind::sensor, {}, "°C"));
    reg.apply_status_update("temp", {"23.5", 23.5, {}}, now_ms());
    auto s = reg.state("temp");
    REQUIRE(s);
    CHECK(s->numeric == doctest::Approx(23.5));
    CHECK(s->unit == "°C");
    CHECK(s->display() == "23.5 °C");
}

TEST_CASE("snapshot is an independent copy in registration order") {
    Registry reg;
    testutil::fill(reg, testutil::room());
    testutil::set_states(reg, {{"light", "on"}, {"tv", "on"}, {"fan", "off"}}, from_millis(100));
    auto snap = reg.snapshot();
    reg.apply_status_update("tv", v("off"), from_millis(200));

    std::vector<std::pair<std::string, std::string>> expected{{"light", "on"}, {"tv", "on"}, {"fan", "off"}};
    CHECK(snap.values() == expected);
    CHECK(snap.find("tv")->value == "on");
    CHECK(snap.find("heater") == nullptr);
    CHECK(reg.snapshot().find("tv")->value == "off");
}

TEST_CASE("listeners see applied updates in order") {
    Registry reg;
    testutil::fill(reg, testutil::room());
    std::vector<std::string> seen;
    auto token = reg.add_listener([&](const DeviceState& s) { seen.push_back(s.device_id + "=" + s.value); });
    reg.apply_status_update("light", v("on"), from_millis(1));
    reg.apply_status_update("light", v("on"), from_millis(1)); // duplicate, no callback
    reg.apply_status_update("fan", v("off"), from_millis(2));
    reg.remove_listener(token);
    reg.apply_status_update("fan", v("on"), from_millis(3));
    CHECK(seen == std::vector<std::string>{"light=on", "fan=off"});
}

TEST_CASE("concurrent writers never move a device backwards") {
    Registry reg;
    testutil::fill(reg, testutil::room());
    std::vector<std::thread> threads;
    for (int t = 0; t < 4; ++t) {
        threads.emplace_back([&reg, t] {
            for (int i = 0; i < 500; ++i) {
                reg.apply_status_update("light", v(i % 2 ? "on" : "off"), from_millis(i * 4 + t));
            }
        });
    }
    std::int64_t last = 0;
    bool monotonic = true;
    std::thread reader([&] {
        for (int i = 0; i < 2000; ++i) {
            auto ts = to_millis(reg.state("light")->updated_at);
            if (ts < last) monotonic = false;
            last = ts;
        }
    });
    for (auto& th : threads) th.join();
    reader.join();
    CHECK(monotonic);
    CHECK(to_millis(reg.state("light")->updated_at) == 499 * 4 + 3);
}
