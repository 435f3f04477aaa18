#include "edgetalk/error.hpp"

namespace edgetalk {

std::string_view to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::malformed_id: return "malformed_id";
    case ErrorCode::duplicate_id: return "duplicate_id";
    case ErrorCode::unknown_device: return "unknown_device";
    case ErrorCode::not_found: return "not_found";
    case ErrorCode::rejected_input: return "rejected_input";
    case ErrorCode::extraction_error: return "extraction_error";
    case ErrorCode::parse_error: return "parse_error";
    case ErrorCode::schema_error: return "schema_error";
    case ErrorCode::type_error: return "type_error";
    case ErrorCode::decode_error: return "decode_error";
    case ErrorCode::io_error: return "io_error";
    case ErrorCode::config_error: return "config_error";
    case ErrorCode::backend_timeout: return "backend_timeout";
    case ErrorCode::backend_connection: return "backend_connection";
    case ErrorCode::backend_http_status: return "backend_http_status";
    case ErrorCode::backend_missing_field: return "backend_missing_field";
    case ErrorCode::unscripted_input: return "unscripted_input";
    case ErrorCode::backpressure: return "backpressure";
    case ErrorCode::session_busy: return "session_busy";
    case ErrorCode::internal: return "internal";
    }
    return "internal";
}

} // namespace edgetalk
