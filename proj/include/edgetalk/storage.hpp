#pragma once

#include "edgetalk/error.hpp"

#include "json.hpp"

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace edgetalk {

enum class EventKind { sensor, user_command, dispatched_action, inference };

std::string_view to_string(EventKind kind);
EventKind parse_event_kind(std::string_view text);

struct EventRecord {
    std::uint64_t seq = 0; // assigned by append
    EventKind kind = EventKind::sensor;
    Timestamp timestamp{};
    std::optional<std::string> device_id;
    nlohmann::ordered_json payload = nlohmann::ordered_json::object();
};

// Payload schemas:
//   sensor             device_id, {"value": string, ...}
//   user_command       {"text": string, ...}
//   dispatched_action  device_id, {"inference_seq": uint, "action": string, ...}
//   inference          {"trace": {"trace_id": string, ...}}
// Throws schema_error.
void validate_record(const EventRecord& record);

// One record per line, no trailing whitespace besides the newline.
std::string encode_record(const EventRecord& record);
EventRecord decode_record(std::string_view line);

struct ContextSnippet {
    std::string text; // at most kMaxSnippetLength bytes
    double score = 0;
    std::uint64_t source_seq = 0;
};

inline constexpr std::size_t kMaxSnippetLength = 200;

std::string render_snippet(const EventRecord& record);

struct RecencyPolicy {
    std::chrono::hours full_bonus_age{24};
    std::chrono::hours zero_bonus_age{24 * 7};
    double bonus = 1.0;

    double bonus_for(std::chrono::milliseconds age) const;
};

// Append-only event history. With a path it is backed by a JSON-lines file
// that is replayed on open and flushed+fsynced on every append; without one it
// lives in memory only.
class EventStore {
public:
    EventStore() = default;
    explicit EventStore(const std::filesystem::path& path);
    ~EventStore();
    EventStore(const EventStore&) = delete;
    EventStore& operator=(const EventStore&) = delete;

    std::uint64_t append(EventRecord record);
    std::uint64_t next_seq() const;

    std::vector<EventRecord> records() const;
    std::vector<EventRecord> query_recent(std::string_view device_id, std::size_t k) const;

    // Lexical retrieval: score = |query terms ∩ record terms| + recency bonus
    // (relative to `now`). Records scoring 0 are left out. Ties go to the
    // higher seq.
    std::vector<ContextSnippet> retrieve_context(std::string_view user_command, std::span<const std::string> device_ids,
                                                 std::size_t limit, Timestamp now,
                                                 const RecencyPolicy& policy = {}) const;

    bool healthy() const;
    std::string last_error() const;
    const std::optional<std::filesystem::path>& path() const { return path_; }

private:
    mutable std::mutex mutex_;
    std::vector<EventRecord> records_;
    std::uint64_t next_seq_ = 1;
    std::optional<std::filesystem::path> path_;
    std::FILE* file_ = nullptr;
    bool healthy_ = true;
    std::string last_error_;
};

std::vector<std::string> tokenize(std::string_view text);

} // namespace edgetalk
