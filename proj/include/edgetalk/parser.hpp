#pragma once

#include "edgetalk/processing.hpp"
#include "edgetalk/registry.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace edgetalk {

struct ActionCommand {
    std::string device;
    std::string action;
    std::optional<std::string> mode;

    bool operator==(const ActionCommand&) const = default;
};

struct ParsedResponse {
    std::string description;
    std::vector<ActionCommand> commands;
    bool repair_applied = false;
    std::vector<std::string> diagnostics;

    // Equality of the parsed content; repair flag and diagnostics excluded.
    bool same_content(const ParsedResponse& other) const {
        return description == other.description && commands == other.commands;
    }
};

// Every balanced {...} span (string-literal aware) that mentions the
// "commands" key, in source order. Nested spans are not reported separately.
std::vector<std::string_view> candidate_blocks(std::string_view raw_text);

// First candidate block; extraction_error (with an excerpt) if there is none.
std::string extract_json_block(std::string_view raw_text);

// The single repair pass: inserts a comma between `}` and `{` that sit next to
// each other inside an array, and drops trailing commas before `]` or `}`.
std::string repair_json(std::string_view text);

// Strict parse, then at most one repair attempt, then the schema check.
// Throws parse_error or schema_error.
ParsedResponse parse_commands(std::string_view candidate);

// extract + parse, moving on to the next candidate block when one fails
// (e.g. the model echoed the template skeleton before its real answer).
ParsedResponse parse_response(std::string_view raw_text);

// Lowercases device ids and maps actions through the synonym table. Devices
// that are not registered stay in the list and get a diagnostic.
ParsedResponse canonicalize(ParsedResponse parsed, const Registry& registry, const SynonymTable& synonyms);

// Renders the block in the same layout the prompt asks for.
std::string to_block(const ParsedResponse& parsed);

} // namespace edgetalk
