#include "doctest.h"
#include "helpers.hpp"

#include "edgetalk/processing.hpp"

using namespace edgetalk;
using testutil::device;

TEST_CASE("synonyms fold case and whitespace") {
    auto syn = SynonymTable::defaults();
    CHECK(syn.lookup("ON") == "on");
    CHECK(syn.lookup("  Turn   Off ") == "off");
    CHECK(syn.lookup("true") == "on");
    CHECK(syn.lookup("0") == "off");
    CHECK_FALSE(syn.lookup("dim"));
    CHECK(syn.canonicalize("Dim") == "dim");
    syn.add("dim", "lower the lights");
    CHECK(syn.lookup("Lower the  lights") == "dim");
    CHECK(fold_word("\tA  b\n") == "a b");
}

TEST_CASE("actuator payloads normalize through the table") {
    auto syn = SynonymTable::defaults();
    auto light = device("light", DeviceKind::light);
    auto r = normalize("Switch On", light, from_millis(5), syn);
    CHECK(r.value == "on");
    CHECK(r.canonical);
    CHECK_FALSE(r.numeric);
    CHECK(to_millis(r.timestamp) == 5);

    auto odd = normalize("Sparkle", light, from_millis(5), syn);
    CHECK(odd.value == "sparkle");
    CHECK_FALSE(odd.canonical);
}

TEST_CASE("sensor payloads keep number and unit") {
    auto syn = SynonymTable::defaults();
    auto temp = device("temp", DeviceKind::sensor, {}, "°C");
    auto a = normalize("23.50", temp, now_ms(), syn);
    CHECK(a.value == "23.5");
    CHECK(a.numeric == doctest::Approx(23.5));
    CHECK(a.unit == "°C");
    CHECK(a.unit_known);

    auto b = normalize("71 F", temp, now_ms(), syn);
    CHECK(b.unit == "F");
    CHECK(b.numeric == doctest::Approx(71));

    auto c = normalize("12 furlongs", temp, now_ms(), syn);
    CHECK_FALSE(c.unit_known);

    auto d = normalize("40", temp, now_ms(), syn, "%");
    CHECK(d.unit == "%");
}

TEST_CASE("invalid UTF-8 is a decode error") {
    auto syn = SynonymTable::defaults();
    CHECK(is_valid_utf8("caf\xc3\xa9"));
    CHECK_FALSE(is_valid_utf8("\xc3("));
    CHECK_FALSE(is_valid_utf8("\xff"));
    try {
        normalize("\xff\xfe", device("light", DeviceKind::light), now_ms(), syn);
        FAIL("expected decode_error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::decode_error);
    }
}

TEST_CASE("dedupe keeps the first of each run") {
    auto syn = SynonymTable::defaults();
    auto light = device("light", DeviceKind::light);
    std::vector<NormalizedReading> in;
    const char* seq[] = {"on", "ON", "off", "off", "on"};
    for (int i = 0; i < 5; ++i) in.push_back(normalize(seq[i], light, from_millis(i), syn));
    auto out = dedupe(in);
    REQUIRE(out.size() == 3);
    CHECK(to_millis(out[0].timestamp) == 0);
    CHECK(to_millis(out[1].timestamp) == 2);
    CHECK(to_millis(out[2].timestamp) == 4);
}

TEST_CASE("window aggregates") {
    auto syn = SynonymTable::defaults();
    auto temp = device("temp", DeviceKind::sensor, {}, "°C");
    std::vector<NormalizedReading> rs;
    double values[] = {20, 22, 27, 21};
    for (int i = 0; i < 4; ++i) rs.push_back(normalize(format_number(values[i]), temp, from_millis(1000 * (i + 1)), syn));

    auto w = TimeWindow::ending_at(from_millis(3000), std::chrono::milliseconds(2000)); // [1000, 3000]
    CHECK(aggregate_window(rs, temp, w, AggregateFn::mean)->numeric == doctest::Approx(23.0));
    CHECK(aggregate_window(rs, temp, w, AggregateFn::min)->value == "20");
    CHECK(aggregate_window(rs, temp, w, AggregateFn::max)->value == "27");
    CHECK(aggregate_window(rs, temp, w, AggregateFn::last)->value == "27");
    CHECK(aggregate_window(rs, temp, TimeWindow{from_millis(5000), from_millis(6000)}, AggregateFn::mean) == std::nullopt);

    auto light = device("light", DeviceKind::light);
    std::vector<NormalizedReading> ls{normalize("on", light, from_millis(1), syn)};
    CHECK(aggregate_window(ls, light, w, AggregateFn::last) == std::nullopt);
    CHECK(aggregate_window(ls, light, TimeWindow{from_millis(0), from_millis(2)}, AggregateFn::last)->value == "on");
    CHECK_THROWS_AS(aggregate_window(ls, light, w, AggregateFn::mean), Error);
    CHECK(parse_aggregate_fn("mean") == AggregateFn::mean);
    CHECK_THROWS_AS(parse_aggregate_fn("median"), Error);
}
