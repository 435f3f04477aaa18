#pragma once

#include <chrono>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace edgetalk {

enum class ErrorCode {
    invalid_argument,
    malformed_id,
    duplicate_id,
    unknown_device,
    not_found,
    rejected_input,
    extraction_error,
    parse_error,
    schema_error,
    type_error,
    decode_error,
    io_error,
    config_error,
    backend_timeout,
    backend_connection,
    backend_http_status,
    backend_missing_field,
    unscripted_input,
    backpressure,
    session_busy,
    internal,
};

std::string_view to_string(ErrorCode code);

// Every failure in the library is reported as an Error carrying one of the
// codes above. The C API maps these one to one onto edgetalk_status values.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

// Wall-clock milliseconds. Used for anything that gets persisted or compared
// across processes (status timestamps, history records).
using Timestamp = std::chrono::time_point<std::chrono::system_clock, std::chrono::milliseconds>;

inline Timestamp now_ms() {
    return std::chrono::time_point_cast<std::chrono::milliseconds>(std::chrono::system_clock::now());
}

inline std::int64_t to_millis(Timestamp t) { return t.time_since_epoch().count(); }
inline Timestamp from_millis(std::int64_t ms) { return Timestamp{std::chrono::milliseconds{ms}}; }

} // namespace edgetalk
