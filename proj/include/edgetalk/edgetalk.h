#ifndef EDGETALK_H
#define EDGETALK_H

#ifdef __cplusplus
extern "C" {
#endif

#if defined(EDGETALK_BUILDING_LIBRARY)
#define EDGETALK_API __attribute__((visibility("default")))
#else
#define EDGETALK_API
#endif

/* Mirrors edgetalk::ErrorCode. */
typedef enum edgetalk_status {
    EDGETALK_OK = 0,
    EDGETALK_E_INVALID_ARGUMENT,
    EDGETALK_E_MALFORMED_ID,
    EDGETALK_E_DUPLICATE_ID,
    EDGETALK_E_UNKNOWN_DEVICE,
    EDGETALK_E_NOT_FOUND,
    EDGETALK_E_REJECTED_INPUT,
    EDGETALK_E_EXTRACTION,
    EDGETALK_E_PARSE,
    EDGETALK_E_SCHEMA,
    EDGETALK_E_TYPE,
    EDGETALK_E_DECODE,
    EDGETALK_E_IO,
    EDGETALK_E_CONFIG,
    EDGETALK_E_BACKEND_TIMEOUT,
    EDGETALK_E_BACKEND_CONNECTION,
    EDGETALK_E_BACKEND_HTTP_STATUS,
    EDGETALK_E_BACKEND_MISSING_FIELD,
    EDGETALK_E_UNSCRIPTED_INPUT,
    EDGETALK_E_BACKPRESSURE,
    EDGETALK_E_SESSION_BUSY,
    EDGETALK_E_INTERNAL
} edgetalk_status;

typedef struct edgetalk_gateway edgetalk_gateway;
typedef struct edgetalk_fleet edgetalk_fleet;
typedef struct edgetalk_broker edgetalk_broker;

EDGETALK_API const char* edgetalk_version(void);
EDGETALK_API const char* edgetalk_status_name(edgetalk_status status);

/* Message of the last failure on the calling thread; "" if none. */
EDGETALK_API const char* edgetalk_last_error(void);

/* Every char** out-parameter is heap memory owned by the caller. */
EDGETALK_API void edgetalk_string_free(char* s);

/* "trace", "debug", "info", "warn", "error", "off". */
EDGETALK_API edgetalk_status edgetalk_set_log_level(const char* level);

/* cli_path wins over EDGETALK_CONFIG; cli_path may be NULL. */
EDGETALK_API edgetalk_status edgetalk_config_resolve(const char* cli_path, char** out_path);

/* Gateway. open replays the history file; start connects to the broker;
   serve starts the REST/SSE API (out_port receives the bound port). */
EDGETALK_API edgetalk_status edgetalk_gateway_open(const char* config_path, edgetalk_gateway** out);
EDGETALK_API edgetalk_status edgetalk_gateway_open_json(const char* config_json, const char* base_dir,
                                                        edgetalk_gateway** out);
EDGETALK_API edgetalk_status edgetalk_gateway_start(edgetalk_gateway* gw);
EDGETALK_API edgetalk_status edgetalk_gateway_wait_connected(edgetalk_gateway* gw, int timeout_ms);
EDGETALK_API edgetalk_status edgetalk_gateway_serve(edgetalk_gateway* gw, int* out_port);
EDGETALK_API edgetalk_status edgetalk_gateway_submit(edgetalk_gateway* gw, const char* session_id, const char* text,
                                                     char** out_trace_json);
EDGETALK_API edgetalk_status edgetalk_gateway_devices(edgetalk_gateway* gw, char** out_json);
EDGETALK_API edgetalk_status edgetalk_gateway_trace(edgetalk_gateway* gw, const char* trace_id, char** out_json);
/* session_id NULL or "" lists all sessions; newest first. */
EDGETALK_API edgetalk_status edgetalk_gateway_traces(edgetalk_gateway* gw, const char* session_id, char** out_json);
EDGETALK_API edgetalk_status edgetalk_gateway_health(edgetalk_gateway* gw, char** out_json);
EDGETALK_API void edgetalk_gateway_close(edgetalk_gateway* gw);

/* Simulated fleet built from the device catalog of a gateway config. */
EDGETALK_API edgetalk_status edgetalk_fleet_open(const char* config_path, edgetalk_fleet** out);
EDGETALK_API edgetalk_status edgetalk_fleet_open_json(const char* config_json, const char* base_dir,
                                                      edgetalk_fleet** out);
EDGETALK_API edgetalk_status edgetalk_fleet_state(edgetalk_fleet* fleet, char** out_json);
EDGETALK_API void edgetalk_fleet_close(edgetalk_fleet* fleet);

/* Small MQTT broker; port 0 picks a free port. */
EDGETALK_API edgetalk_status edgetalk_broker_open(const char* host, int port, edgetalk_broker** out);
EDGETALK_API int edgetalk_broker_port(const edgetalk_broker* broker);
EDGETALK_API void edgetalk_broker_close(edgetalk_broker* broker);

/* Runs a scenario. broker_host NULL / broker_port 0 uses an in-process broker.
   format is "table" or "records". out_accuracy (nullable) is set to -1 when
   the report has no device-states. */
EDGETALK_API edgetalk_status edgetalk_bench_run(const char* scenario_path, const char* broker_host, int broker_port,
                                                const char* format, int include_timing, char** out_report,
                                                double* out_accuracy);

/* HTTP helper for talking to a running gateway. body may be NULL. */
EDGETALK_API edgetalk_status edgetalk_client_request(const char* base_url, const char* method, const char* path,
                                                     const char* body, int* out_http_status, char** out_body);

/* Human-readable plan log for a trace JSON document. */
EDGETALK_API edgetalk_status edgetalk_trace_render(const char* trace_json, char** out_text);

#ifdef __cplusplus
}
#endif

#endif /* EDGETALK_H */
