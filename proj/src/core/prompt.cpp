#include "edgetalk/prompt.hpp"

#include "json.hpp"

#include <algorithm>

namespace edgetalk {

namespace {

constexpr std::string_view kResponseInstructions =
    "First, give a 20-word description. Then respond ONLY in the following JSON format:\n"
    "{\n"
    "  \"description\": \"<short description>\",\n"
    "  \"commands\": [\n"
    "    {\"device\": \"<device>\", \"action\": \"<action>\", \"mode\": \"<mode> (optional)\" }\n"
    "  ]\n"
    "}";

bool is_control(unsigned char c) { return c < 0x20 || c == 0x7f; }

std::size_t code_points(std::string_view s) {
    return static_cast<std::size_t>(
        std::count_if(s.begin(), s.end(), [](char c) { return (static_cast<unsigned char>(c) & 0xc0) != 0x80; }));
}

} // namespace

std::string sanitize_user_command(std::string_view text, std::size_t max_length) {
    for (char c : text) {
        if (is_control(static_cast<unsigned char>(c))) {
            throw Error(ErrorCode::rejected_input, "command contains a control character");
        }
    }
    while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
    while (!text.empty() && text.back() == ' ') text.remove_suffix(1);
    if (text.empty()) throw Error(ErrorCode::rejected_input, "command is empty");
    if (code_points(text) > max_length) {
        throw Error(ErrorCode::rejected_input, "command longer than " + std::to_string(max_length) + " characters");
    }
    return std::string(text);
}

StructuredPrompt build_structured_prompt(const PromptBundle& bundle, const PromptOptions& options) {
    if (bundle.devices.empty()) throw Error(ErrorCode::rejected_input, "prompt needs at least one device");
    const auto& cmd = bundle.user_command;
    if (cmd.empty() || cmd.find_first_of("\r\n") != std::string::npos || cmd.front() == ' ' || cmd.back() == ' ') {
        throw Error(ErrorCode::rejected_input, "user command must be a stripped single line");
    }

    nlohmann::ordered_json readings = nlohmann::ordered_json::object();
    for (const auto& [id, value] : bundle.current_sensor_values) {
        if (std::find(bundle.devices.begin(), bundle.devices.end(), id) == bundle.devices.end()) {
            throw Error(ErrorCode::rejected_input, "reading for '" + id + "' which is not in the device list");
        }
        readings[id] = value;
    }

    std::string text;
    text += cmd;
    text += ".\n";
    text += "Only consider these devices: ";
    for (std::size_t i = 0; i < bundle.devices.size(); ++i) {
        if (i > 0) text += ", ";
        text += bundle.devices[i];
    }
    text += ".\n";
    text += "Current sensor readings: ";
    text += readings.dump();
    text += "\n";
    if (options.context_block && !bundle.context_snippets.empty()) {
        text += "Relevant history:\n";
        for (const auto& s : bundle.context_snippets) {
            text += "- ";
            text += s.text;
            text += "\n";
        }
    }
    text += kResponseInstructions;
    return StructuredPrompt{std::move(text), std::string(kPromptTemplateVersion)};
}

std::string command_from_prompt(std::string_view prompt_text) {
    auto line = prompt_text.substr(0, prompt_text.find('\n'));
    if (!line.empty() && line.back() == '.') line.remove_suffix(1);
    return std::string(line);
}

} // namespace edgetalk
