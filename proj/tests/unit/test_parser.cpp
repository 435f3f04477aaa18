#include "doctest.h"
#include "helpers.hpp"

#include "edgetalk/parser.hpp"

#include "json.hpp"

#include <random>

using namespace edgetalk;

namespace {

std::string fx(const std::string& name) { return testutil::slurp(testutil::fixture("parser/" + name)); }

ErrorCode code_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    return ErrorCode::internal;
}

std::vector<ParsedResponse> generated_corpus(std::size_t n, unsigned seed) {
    std::mt19937 rng(seed);
    const std::vector<std::string> devices{"light", "tv", "fan", "heater", "blind_2", "porch-light"};
    const std::vector<std::string> actions{"on", "off", "dim", "open", "close", "42"};
    const std::vector<std::string> words{"cozy", "evening", "\"quoted\"", "brace }", "{ brace", "café", "tab\tin", "done."};
    std::vector<ParsedResponse> out;
    for (std::size_t i = 0; i < n; ++i) {
        ParsedResponse p;
        auto wc = 1 + rng() % 5;
        for (std::size_t w = 0; w < wc; ++w) p.description += (w ? " " : "") + words[rng() % words.size()];
        auto cc = rng() % 5; // empty command lists included
        for (std::size_t c = 0; c < cc; ++c) {
            ActionCommand a{devices[rng() % devices.size()], actions[rng() % actions.size()], std::nullopt};
            if (rng() % 3 == 0) a.mode = rng() % 2 ? "night" : "eco";
            p.commands.push_back(a);
        }
        out.push_back(std::move(p));
    }
    return out;
}

} // namespace

TEST_CASE("transcript output needs the comma repair and yields three commands") {
    auto raw = fx("sleep_transcript.txt");
    auto parsed = parse_response(raw);
    CHECK(parsed.repair_applied);
    CHECK(parsed.description == "Prepare your sleep sanctuary with a dim light and calming TV settings.");
    REQUIRE(parsed.commands.size() == 3);
    CHECK(parsed.commands[0] == ActionCommand{"light", "dim", std::nullopt});
    CHECK(parsed.commands[1] == ActionCommand{"tv", "off", std::nullopt});
    CHECK(parsed.commands[2] == ActionCommand{"fan", "off", std::nullopt});

    // Without the repair pass the block is not JSON.
    auto block = extract_json_block(raw);
    CHECK(nlohmann::json::parse(block, nullptr, false).is_discarded());
    CHECK_FALSE(nlohmann::json::parse(repair_json(block), nullptr, false).is_discarded());
}

TEST_CASE("single well-formed command needs no repair") {
    auto p = parse_response(R"({"description": "Fan on.", "commands": [{"device": "fan", "action": "on"}]})");
    CHECK_FALSE(p.repair_applied);
    REQUIRE(p.commands.size() == 1);
    CHECK(p.commands[0].device == "fan");
}

TEST_CASE("generated blocks round trip without repair") {
    auto corpus = generated_corpus(40, 20240611);
    for (const auto& original : corpus) {
        auto text = to_block(original);
        auto back = parse_response("Sure, here you go:\n" + text + "\nHope that helps!");
        CHECK(back.same_content(original));
        CHECK_FALSE(back.repair_applied);
        CHECK(to_block(back) == text);
        CHECK(repair_json(text) == text);
    }
}

TEST_CASE("skeleton echo is skipped in favour of the real answer") {
    auto raw = fx("skeleton_echo.txt");
    CHECK(candidate_blocks(raw).size() == 2);
    auto p = parse_response(raw);
    REQUIRE(p.commands.size() == 1);
    CHECK(p.commands[0] == ActionCommand{"light", "off", std::nullopt});
    CHECK_FALSE(p.repair_applied);
}

TEST_CASE("trailing commas are repaired") {
    auto p = parse_response(fx("trailing_comma.txt"));
    CHECK(p.repair_applied);
    REQUIRE(p.commands.size() == 1);
    CHECK(p.commands[0].action == "on");
}

TEST_CASE("fenced output with a mode") {
    auto p = parse_response(fx("fenced.txt"));
    REQUIRE(p.commands.size() == 2);
    CHECK(p.commands[1].mode == "evening");
}

TEST_CASE("braces inside strings do not confuse extraction") {
    auto p = parse_response(fx("braces_in_strings.txt"));
    CHECK(p.description == "Braces like } and { inside text, plus \"quotes\".");
    CHECK(p.commands.size() == 1);
}

TEST_CASE("extra fields are ignored with a diagnostic") {
    auto p = parse_response(fx("extra_fields.txt"));
    REQUIRE(p.commands.size() == 1);
    CHECK_FALSE(p.diagnostics.empty());
}

TEST_CASE("failure modes have distinct errors") {
    CHECK(code_of([] { parse_response(fx("no_block.txt")); }) == ErrorCode::extraction_error);
    CHECK(code_of([] { parse_commands(fx("commands_not_array.txt")); }) == ErrorCode::schema_error);
    CHECK(code_of([] { parse_commands(fx("unrepairable.txt")); }) == ErrorCode::parse_error);
    CHECK(code_of([] { parse_commands(R"({"description": 5, "commands": []})"); }) == ErrorCode::schema_error);
    CHECK(code_of([] { parse_commands(R"({"description": "x", "commands": [{"device": "tv"}]})"); }) ==
          ErrorCode::schema_error);
}

TEST_CASE("canonicalize folds devices and actions") {
    Registry reg;
    testutil::fill(reg, testutil::room());
    ParsedResponse p;
    p.commands = {{"TV", "Turn Off", std::nullopt}, {"Heater", "ON", std::nullopt}, {"light", "dim", std::nullopt}};
    auto c = canonicalize(p, reg, SynonymTable::defaults());
    CHECK(c.commands[0] == ActionCommand{"tv", "off", std::nullopt});
    CHECK(c.commands[1] == ActionCommand{"heater", "on", std::nullopt});
    CHECK(c.commands[2].action == "dim");
    REQUIRE(c.diagnostics.size() == 1);
    CHECK(c.diagnostics[0].find("heater") != std::string::npos);
}
