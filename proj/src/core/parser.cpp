#include "edgetalk/parser.hpp"

#include "json.hpp"

#include <vector>

namespace edgetalk {

namespace {

using json = nlohmann::ordered_json;

bool is_ws(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; }

// Index of the brace closing the one at `open`, or npos.
std::size_t match_brace(std::string_view s, std::size_t open) {
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    for (std::size_t i = open; i < s.size(); ++i) {
        char c = s[i];
        if (in_string) {
            if (escaped) {
                escaped = false;
            } else if (c == '\\') {
                escaped = true;
            } else if (c == '"') {
                in_string = false;
            }
            continue;
        }
        if (c == '"') {
            in_string = true;
        } else if (c == '{') {
            ++depth;
        } else if (c == '}') {
            if (--depth == 0) return i;
        }
    }
    return std::string_view::npos;
}

bool is_placeholder(const std::string& s) { return s.size() >= 2 && s.front() == '<' && s.back() == '>'; }

std::string excerpt(std::string_view text) {
    constexpr std::size_t kExcerpt = 200;
    std::string out(text.substr(0, kExcerpt));
    while (!out.empty() && (static_cast<unsigned char>(out.back()) & 0xc0) == 0x80) out.pop_back();
    return out;
}

ParsedResponse check_schema(const json& doc) {
    if (!doc.is_object()) throw Error(ErrorCode::schema_error, "response block is not an object");
    ParsedResponse out;
    for (const auto& [key, value] : doc.items()) {
        if (key != "description" && key != "commands") out.diagnostics.push_back("ignored field '" + key + "'");
    }
    if (!doc.contains("description")) {
        out.diagnostics.push_back("missing description");
    } else if (!doc["description"].is_string()) {
        throw Error(ErrorCode::schema_error, "\"description\" must be a string");
    } else {
        out.description = doc["description"].get<std::string>();
    }
    if (!doc.contains("commands") || !doc["commands"].is_array()) {
        throw Error(ErrorCode::schema_error, "\"commands\" must be an array");
    }
    std::size_t index = 0;
    for (const auto& item : doc["commands"]) {
        auto where = "commands[" + std::to_string(index++) + "]";
        if (!item.is_object()) throw Error(ErrorCode::schema_error, where + " is not an object");
        ActionCommand cmd;
        for (const char* key : {"device", "action"}) {
            if (!item.contains(key) || !item[key].is_string() || item[key].get<std::string>().empty()) {
                throw Error(ErrorCode::schema_error, where + "." + key + " must be a non-empty string");
            }
        }
        cmd.device = item["device"].get<std::string>();
        cmd.action = item["action"].get<std::string>();
        if (is_placeholder(cmd.device) || is_placeholder(cmd.action)) {
            throw Error(ErrorCode::schema_error, where + " holds template placeholders");
        }
        if (item.contains("mode") && !item["mode"].is_null()) {
            if (!item["mode"].is_string()) throw Error(ErrorCode::schema_error, where + ".mode must be a string");
            cmd.mode = item["mode"].get<std::string>();
        }
        for (const auto& [key, value] : item.items()) {
            if (key != "device" && key != "action" && key != "mode") {
                out.diagnostics.push_back("ignored field '" + key + "' in " + where);
            }
        }
        out.commands.push_back(std::move(cmd));
    }
    return out;
}

} // namespace

std::vector<std::string_view> candidate_blocks(std::string_view raw) {
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    while (pos < raw.size()) {
        auto start = raw.find('{', pos);
        if (start == std::string_view::npos) break;
        auto end = match_brace(raw, start);
        if (end == std::string_view::npos) {
            pos = start + 1;
            continue;
        }
        auto block = raw.substr(start, end - start + 1);
        if (block.find("\"commands\"") != std::string_view::npos) out.push_back(block);
        pos = end + 1;
    }
    return out;
}

std::string extract_json_block(std::string_view raw_text) {
    auto blocks = candidate_blocks(raw_text);
    if (blocks.empty()) {
        throw Error(ErrorCode::extraction_error, "no JSON block with \"commands\" in model output: " + excerpt(raw_text));
    }
    return std::string(blocks.front());
}

std::string repair_json(std::string_view text) {
    std::string out;
    out.reserve(text.size() + 8);
    std::vector<char> stack;
    bool in_string = false;
    bool escaped = false;
    auto next_non_ws = [&](std::size_t from) {
        while (from < text.size() && is_ws(text[from])) ++from;
        return from < text.size() ? text[from] : '\0';
    };
    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (in_string) {
            out.push_back(c);
            if (escaped) {
                escaped = false;
            } else if (c == '\\') {
                escaped = true;
            } else if (c == '"') {
                in_string = false;
            }
            continue;
        }
        switch (c) {
        case '"':
            in_string = true;
            out.push_back(c);
            break;
        case '{':
        case '[':
            stack.push_back(c);
            out.push_back(c);
            break;
        case ']':
            if (!stack.empty()) stack.pop_back();
            out.push_back(c);
            break;
        case '}':
            if (!stack.empty()) stack.pop_back();
            out.push_back(c);
            if (!stack.empty() && stack.back() == '[' && next_non_ws(i + 1) == '{') out.push_back(',');
            break;
        case ',': {
            char next = next_non_ws(i + 1);
            if (next != ']' && next != '}') out.push_back(c);
            break;
        }
        default:
            out.push_back(c);
        }
    }
    return out;
}

ParsedResponse parse_commands(std::string_view candidate) {
    bool repaired = false;
    auto doc = json::parse(candidate.begin(), candidate.end(), nullptr, false);
    if (doc.is_discarded()) {
        auto fixed = repair_json(candidate);
        doc = json::parse(fixed, nullptr, false);
        if (doc.is_discarded()) {
            throw Error(ErrorCode::parse_error, "response block is not valid JSON, even after repair: " + excerpt(candidate));
        }
        repaired = true;
    }
    auto parsed = check_schema(doc);
    parsed.repair_applied = repaired;
    if (repaired) parsed.diagnostics.insert(parsed.diagnostics.begin(), "repaired malformed JSON");
    return parsed;
}

ParsedResponse parse_response(std::string_view raw_text) {
    auto blocks = candidate_blocks(raw_text);
    if (blocks.empty()) {
        throw Error(ErrorCode::extraction_error, "no JSON block with \"commands\" in model output: " + excerpt(raw_text));
    }
    std::optional<Error> last;
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        try {
            auto parsed = parse_commands(blocks[i]);
            if (i > 0) parsed.diagnostics.push_back("skipped " + std::to_string(i) + " earlier block(s)");
            return parsed;
        } catch (const Error& e) {
            last = e;
        }
    }
    throw *last;
}

ParsedResponse canonicalize(ParsedResponse parsed, const Registry& registry, const SynonymTable& synonyms) {
    for (auto& cmd : parsed.commands) {
        cmd.device = fold_word(cmd.device);
        cmd.action = synonyms.canonicalize(cmd.action);
        if (!registry.find(cmd.device)) parsed.diagnostics.push_back("unknown device: " + cmd.device);
    }
    return parsed;
}

std::string to_block(const ParsedResponse& parsed) {
    auto quote = [](const std::string& s) { return json(s).dump(); };
    std::string out = "{\n  \"description\": " + quote(parsed.description) + ",\n  \"commands\": [";
    for (std::size_t i = 0; i < parsed.commands.size(); ++i) {
        const auto& c = parsed.commands[i];
        out += i == 0 ? "\n" : ",\n";
        out += "    {\"device\": " + quote(c.device) + ", \"action\": " + quote(c.action);
        if (c.mode) out += ", \"mode\": " + quote(*c.mode);
        out += "}";
    }
    out += parsed.commands.empty() ? "]\n}" : "\n  ]\n}";
    return out;
}

} // namespace edgetalk
