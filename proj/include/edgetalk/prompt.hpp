#pragma once

#include "edgetalk/storage.hpp"

#include <string>
#include <utility>
#include <vector>

namespace edgetalk {

struct PromptBundle {
    std::string user_command;
    std::vector<std::string> devices;
    // Insertion order is kept in the serialized readings.
    std::vector<std::pair<std::string, std::string>> current_sensor_values;
    std::vector<ContextSnippet> context_snippets;
};

struct PromptOptions {
    // Adds a "Relevant history:" block after the readings line when there are snippets.
    bool context_block = false;
};

struct StructuredPrompt {
    std::string text;
    std::string template_version;

    bool operator==(const StructuredPrompt&) const = default;
};

inline constexpr std::string_view kPromptTemplateVersion = "structured-v1";
inline constexpr std::size_t kDefaultMaxCommandLength = 500;

// Throws rejected_input for an empty device list, readings for devices not in
// the list, or a command that is not a stripped single line.
StructuredPrompt build_structured_prompt(const PromptBundle& bundle, const PromptOptions& options = {});

// Trims surrounding spaces, rejects control characters (newlines included),
// empty commands and commands longer than `max_length` code points.
std::string sanitize_user_command(std::string_view text, std::size_t max_length = kDefaultMaxCommandLength);

// Recovers the user command from a prompt built by build_structured_prompt
// (its first line minus the trailing period).
std::string command_from_prompt(std::string_view prompt_text);

} // namespace edgetalk
