#include "edgetalk/storage.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <unistd.h>

namespace edgetalk {

using json = nlohmann::ordered_json;

std::string_view to_string(EventKind kind) {
    switch (kind) {
    case EventKind::sensor: return "sensor";
    case EventKind::user_command: return "user_command";
    case EventKind::dispatched_action: return "dispatched_action";
    case EventKind::inference: return "inference";
    }
    return "sensor";
}

EventKind parse_event_kind(std::string_view text) {
    if (text == "sensor") return EventKind::sensor;
    if (text == "user_command") return EventKind::user_command;
    if (text == "dispatched_action") return EventKind::dispatched_action;
    if (text == "inference") return EventKind::inference;
    throw Error(ErrorCode::schema_error, "unknown event kind: " + std::string(text));
}

namespace {

void require(bool ok, EventKind kind, const std::string& what) {
    if (!ok) throw Error(ErrorCode::schema_error, std::string(to_string(kind)) + " record: " + what);
}

std::string truncate_utf8(std::string text, std::size_t limit) {
    if (text.size() <= limit) return text;
    std::size_t cut = limit - 3;
    while (cut > 0 && (static_cast<unsigned char>(text[cut]) & 0xc0) == 0x80) --cut;
    text.resize(cut);
    text += "...";
    return text;
}

} // namespace

void validate_record(const EventRecord& r) {
    require(r.payload.is_object(), r.kind, "payload must be an object");
    switch (r.kind) {
    case EventKind::sensor:
        require(r.device_id.has_value() && !r.device_id->empty(), r.kind, "device_id required");
        require(r.payload.contains("value") && r.payload["value"].is_string(), r.kind, "\"value\" must be a string");
        break;
    case EventKind::user_command:
        require(r.payload.contains("text") && r.payload["text"].is_string(), r.kind, "\"text\" must be a string");
        break;
    case EventKind::dispatched_action:
        require(r.device_id.has_value() && !r.device_id->empty(), r.kind, "device_id required");
        require(r.payload.contains("inference_seq") && r.payload["inference_seq"].is_number_unsigned(), r.kind,
                "\"inference_seq\" must be an unsigned integer");
        require(r.payload.contains("action") && r.payload["action"].is_string(), r.kind, "\"action\" must be a string");
        break;
    case EventKind::inference:
        require(r.payload.contains("trace") && r.payload["trace"].is_object(), r.kind, "\"trace\" must be an object");
        require(r.payload["trace"].contains("trace_id") && r.payload["trace"]["trace_id"].is_string(), r.kind,
                "trace.trace_id must be a string");
        break;
    }
}

std::string encode_record(const EventRecord& r) {
    json line;
    line["seq"] = r.seq;
    line["kind"] = to_string(r.kind);
    line["ts"] = to_millis(r.timestamp);
    if (r.device_id) line["device_id"] = *r.device_id;
    line["payload"] = r.payload;
    return line.dump();
}

EventRecord decode_record(std::string_view text) {
    auto line = json::parse(text.begin(), text.end(), nullptr, false);
    if (line.is_discarded() || !line.is_object()) throw Error(ErrorCode::parse_error, "history line is not a JSON object");
    try {
        EventRecord r;
        r.seq = line.at("seq").get<std::uint64_t>();
        r.kind = parse_event_kind(line.at("kind").get<std::string>());
        r.timestamp = from_millis(line.at("ts").get<std::int64_t>());
        if (line.contains("device_id")) r.device_id = line["device_id"].get<std::string>();
        r.payload = line.at("payload");
        validate_record(r);
        return r;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::parse_error, std::string("history record: ") + e.what());
    }
}

std::string render_snippet(const EventRecord& r) {
    std::string text;
    const auto& p = r.payload;
    auto str = [&](const json& obj, const char* key) -> std::string {
        return obj.contains(key) && obj[key].is_string() ? obj[key].get<std::string>() : std::string{};
    };
    switch (r.kind) {
    case EventKind::sensor:
        text = r.device_id.value_or("?") + " reported " + str(p, "value");
        if (!str(p, "unit").empty()) text += " " + str(p, "unit");
        break;
    case EventKind::user_command:
        text = "user asked: " + str(p, "text");
        break;
    case EventKind::dispatched_action:
        text = "sent " + str(p, "action") + " to " + r.device_id.value_or("?");
        break;
    case EventKind::inference: {
        const auto& t = p["trace"];
        text = "\"" + str(t, "user_command") + "\" ->";
        bool any = false;
        if (t.contains("parsed") && t["parsed"].is_object() && t["parsed"].contains("commands")) {
            for (const auto& c : t["parsed"]["commands"]) {
                text += (any ? ", " : " ") + str(c, "device") + "=" + str(c, "action");
                any = true;
            }
        }
        if (!any) text += " no commands";
        if (!str(t, "status").empty()) text += " (" + str(t, "status") + ")";
        break;
    }
    }
    return truncate_utf8(std::move(text), kMaxSnippetLength);
}

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : text) {
        auto c = static_cast<unsigned char>(ch);
        if (std::isalnum(c) || c >= 0x80) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

double RecencyPolicy::bonus_for(std::chrono::milliseconds age) const {
    if (age < std::chrono::milliseconds::zero()) age = std::chrono::milliseconds::zero();
    if (age <= full_bonus_age) return bonus;
    if (age >= zero_bonus_age) return 0.0;
    auto span = std::chrono::duration<double>(zero_bonus_age - full_bonus_age).count();
    auto left = std::chrono::duration<double>(zero_bonus_age - age).count();
    return bonus * left / span;
}

EventStore::EventStore(const std::filesystem::path& path) : path_(path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    {
        std::ifstream in(path);
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty()) continue;
            EventRecord r;
            try {
                r = decode_record(line);
            } catch (const Error& e) {
                throw Error(ErrorCode::parse_error, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
            }
            if (r.seq < next_seq_) {
                throw Error(ErrorCode::parse_error, path.string() + ":" + std::to_string(lineno) + ": seq not increasing");
            }
            next_seq_ = r.seq + 1;
            records_.push_back(std::move(r));
        }
    }
    file_ = std::fopen(path.c_str(), "a");
    if (file_ == nullptr) throw Error(ErrorCode::io_error, "cannot open history file " + path.string());
}

EventStore::~EventStore() {
    if (file_ != nullptr) std::fclose(file_);
}

std::uint64_t EventStore::append(EventRecord record) {
    validate_record(record);
    std::lock_guard lock(mutex_);
    record.seq = next_seq_;
    if (file_ != nullptr) {
        auto line = encode_record(record) + "\n";
        bool ok = std::fwrite(line.data(), 1, line.size(), file_) == line.size() && std::fflush(file_) == 0 &&
                  ::fsync(::fileno(file_)) == 0;
        if (!ok) {
            healthy_ = false;
            last_error_ = "write to " + path_->string() + " failed";
            throw Error(ErrorCode::io_error, last_error_);
        }
    }
    ++next_seq_;
    records_.push_back(std::move(record));
    return records_.back().seq;
}

std::uint64_t EventStore::next_seq() const {
    std::lock_guard lock(mutex_);
    return next_seq_;
}

std::vector<EventRecord> EventStore::records() const {
    std::lock_guard lock(mutex_);
    return records_;
}

std::vector<EventRecord> EventStore::query_recent(std::string_view device_id, std::size_t k) const {
    std::lock_guard lock(mutex_);
    std::vector<EventRecord> out;
    for (auto it = records_.rbegin(); it != records_.rend() && out.size() < k; ++it) {
        if (it->device_id && *it->device_id == device_id) out.push_back(*it);
    }
    return out;
}

std::vector<ContextSnippet> EventStore::retrieve_context(std::string_view user_command,
                                                         std::span<const std::string> device_ids, std::size_t limit,
                                                         Timestamp now, const RecencyPolicy& policy) const {
    if (limit == 0) return {};
    std::set<std::string> query;
    for (auto& t : tokenize(user_command)) query.insert(std::move(t));
    for (const auto& id : device_ids) {
        for (auto& t : tokenize(id)) query.insert(std::move(t));
    }

    std::vector<ContextSnippet> scored;
    {
        std::lock_guard lock(mutex_);
        for (const auto& r : records_) {
            auto text = render_snippet(r);
            auto terms = tokenize(text);
            std::set<std::string> unique(terms.begin(), terms.end());
            std::size_t overlap = 0;
            for (const auto& t : unique) overlap += query.count(t);
            double score = static_cast<double>(overlap) +
                           policy.bonus_for(std::chrono::duration_cast<std::chrono::milliseconds>(now - r.timestamp));
            if (score <= 0) continue;
            scored.push_back({std::move(text), score, r.seq});
        }
    }
    std::sort(scored.begin(), scored.end(), [](const ContextSnippet& a, const ContextSnippet& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.source_seq > b.source_seq;
    });
    if (scored.size() > limit) scored.resize(limit);
    return scored;
}

bool EventStore::healthy() const {
    std::lock_guard lock(mutex_);
    return healthy_;
}

std::string EventStore::last_error() const {
    std::lock_guard lock(mutex_);
    return last_error_;
}

} // namespace edgetalk
