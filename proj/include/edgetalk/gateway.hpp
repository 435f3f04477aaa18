#pragma once

#include "edgetalk/backend.hpp"
#include "edgetalk/config.hpp"
#include "edgetalk/events.hpp"
#include "edgetalk/parser.hpp"
#include "edgetalk/reconcile.hpp"
#include "edgetalk/registry.hpp"
#include "edgetalk/storage.hpp"
#include "edgetalk/transport.hpp"

#include "json.hpp"

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace edgetalk {

enum class TraceStatus { ok, rejected_input, backend_error, parse_error, dispatch_error };

std::string_view to_string(TraceStatus status);
TraceStatus parse_trace_status(std::string_view text);

struct StageTimings {
    std::chrono::nanoseconds prompt_build{0}; // snapshot + retrieval + template
    std::chrono::nanoseconds inference{0};    // == result.latency
    std::chrono::nanoseconds parse{0};        // extract + parse + canonicalize + plan
    std::chrono::nanoseconds dispatch{0};
    std::chrono::nanoseconds total{0};        // whole pipeline, queue wait excluded
    std::chrono::nanoseconds queued{0};

    std::chrono::nanoseconds stage_sum() const { return prompt_build + inference + parse + dispatch; }
};

// Offsets from the start of the pipeline; used to check stage ordering.
struct StageMark {
    std::string stage;
    std::chrono::nanoseconds start{0};
    std::chrono::nanoseconds end{0};

    bool operator==(const StageMark&) const = default;
};

struct InferenceTrace {
    std::string trace_id;
    std::string session_id;
    std::string user_command;
    TraceStatus status = TraceStatus::ok;
    std::optional<ErrorCode> error_code;
    std::string error;
    Timestamp submitted_at{};
    Timestamp finished_at{};
    std::vector<std::pair<std::string, std::string>> snapshot;
    std::vector<ContextSnippet> context;
    std::optional<StructuredPrompt> prompt;
    std::optional<InferenceResult> result;
    std::optional<ParsedResponse> parsed;
    std::optional<ReconciliationPlan> plan;
    std::optional<DispatchReport> dispatch;
    StageTimings timings;
    std::vector<StageMark> stages;
};

nlohmann::ordered_json to_json(const InferenceTrace& trace);
InferenceTrace trace_from_json(const nlohmann::ordered_json& doc);

// Console rendering: status line, raw model output, then the plan log.
std::string render_trace(const InferenceTrace& trace);

struct DeviceView {
    DeviceDescriptor descriptor;
    DeviceState state;
};

nlohmann::ordered_json to_json(const DeviceView& view);

struct HealthReport {
    bool healthy = true;
    mqtt::LinkState broker = mqtt::LinkState::disconnected;
    bool history_ok = true;
    std::string history_error;
    std::size_t devices = 0;
    std::size_t traces = 0;
    std::size_t event_subscribers = 0;
    std::size_t undecodable_status = 0;
    RegistryCounters registry;
};

nlohmann::ordered_json to_json(const HealthReport& health);

// Overrides used by tests and the bench. Anything left empty is built from
// the config.
struct GatewayDeps {
    std::unique_ptr<Backend> backend;
    CommandPublisher* publisher = nullptr; // no MQTT transport when set
};

// Runs the command pipeline and owns registry, history, transport and the
// event hub. Construction replays the history file (device states and trace
// list); start() connects to the broker.
class Gateway {
public:
    explicit Gateway(GatewayConfig config, GatewayDeps deps = {});
    ~Gateway();
    Gateway(const Gateway&) = delete;
    Gateway& operator=(const Gateway&) = delete;

    void start();
    void stop();

    // Blocks while an earlier command of the same session is in flight; up to
    // session_queue_depth callers wait in FIFO order, further ones get
    // session_busy. Stage failures are reported in the trace, not thrown.
    InferenceTrace submit_command(const std::string& session_id, const std::string& text);

    std::vector<DeviceView> get_devices() const;
    InferenceTrace get_trace(const std::string& trace_id) const; // not_found
    // Newest first. Empty session_id lists every session.
    std::vector<InferenceTrace> list_traces(const std::string& session_id = {}) const;

    std::shared_ptr<EventSubscription> subscribe_events(std::size_t capacity = EventHub::kDefaultCapacity);
    HealthReport health() const;

    // Transport callback; public so status traffic can be injected directly.
    void ingest_status(const StatusEvent& event);

    std::optional<AggregateValue> aggregate(const std::string& device_id, std::chrono::milliseconds window,
                                            AggregateFn fn, Timestamp now) const;

    Registry& registry() { return registry_; }
    const EventStore& history() const { return *history_; }
    const GatewayConfig& config() const { return config_; }
    bool wait_connected(std::chrono::milliseconds timeout) const;
    EventHub& events() { return hub_; }

private:
    struct Lane {
        std::mutex mutex;
        std::condition_variable cv;
        std::uint64_t next_ticket = 0;
        std::uint64_t serving = 0;
    };

    void replay_history();
    void run_pipeline(InferenceTrace& trace, const std::string& text);
    void journal(InferenceTrace& trace);
    void publish_trace_event(const InferenceTrace& trace, std::string_view phase);
    std::shared_ptr<Lane> lane_for(const std::string& session_id);

    GatewayConfig config_;
    Registry registry_;
    std::unique_ptr<EventStore> history_;
    std::unique_ptr<Backend> backend_;
    std::unique_ptr<Transport> transport_;
    CommandPublisher* publisher_ = nullptr;
    EventHub hub_;
    std::size_t registry_listener_ = 0;

    mutable std::mutex history_mutex_; // makes seq reservation + appends atomic
    mutable std::mutex traces_mutex_;
    std::vector<InferenceTrace> traces_; // chronological
    std::uint64_t next_trace_ = 1;

    std::mutex lanes_mutex_;
    std::map<std::string, std::shared_ptr<Lane>> lanes_;

    std::atomic<std::size_t> undecodable_{0};
    bool started_ = false;
};

} // namespace edgetalk
