#include "edgetalk/gateway.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>

namespace edgetalk {

using json = nlohmann::ordered_json;
using SteadyClock = std::chrono::steady_clock;
using std::chrono::nanoseconds;

std::string_view to_string(TraceStatus status) {
    switch (status) {
    case TraceStatus::ok: return "ok";
    case TraceStatus::rejected_input: return "rejected_input";
    case TraceStatus::backend_error: return "backend_error";
    case TraceStatus::parse_error: return "parse_error";
    case TraceStatus::dispatch_error: return "dispatch_error";
    }
    return "ok";
}

TraceStatus parse_trace_status(std::string_view text) {
    for (auto s : {TraceStatus::ok, TraceStatus::rejected_input, TraceStatus::backend_error, TraceStatus::parse_error,
                   TraceStatus::dispatch_error}) {
        if (to_string(s) == text) return s;
    }
    throw Error(ErrorCode::invalid_argument, "unknown trace status: " + std::string(text));
}

namespace {

ErrorCode parse_error_code(std::string_view text) {
    for (int i = 0; i <= static_cast<int>(ErrorCode::internal); ++i) {
        auto code = static_cast<ErrorCode>(i);
        if (to_string(code) == text) return code;
    }
    return ErrorCode::internal;
}

std::int64_t ns(nanoseconds d) { return d.count(); }

json optional_string(const std::optional<std::string>& s) { return s ? json(*s) : json(nullptr); }

std::optional<std::string> read_optional_string(const json& obj, const char* key) {
    if (!obj.contains(key) || obj[key].is_null()) return std::nullopt;
    return obj[key].get<std::string>();
}

json parsed_to_json(const ParsedResponse& p) {
    json commands = json::array();
    for (const auto& c : p.commands) {
        json item{{"device", c.device}, {"action", c.action}};
        if (c.mode) item["mode"] = *c.mode;
        commands.push_back(std::move(item));
    }
    return json{{"description", p.description},
                {"commands", std::move(commands)},
                {"repair_applied", p.repair_applied},
                {"diagnostics", p.diagnostics}};
}

ParsedResponse parsed_from_json(const json& j) {
    ParsedResponse p;
    p.description = j.at("description").get<std::string>();
    for (const auto& c : j.at("commands")) {
        p.commands.push_back({c.at("device").get<std::string>(), c.at("action").get<std::string>(),
                              read_optional_string(c, "mode")});
    }
    p.repair_applied = j.at("repair_applied").get<bool>();
    p.diagnostics = j.at("diagnostics").get<std::vector<std::string>>();
    return p;
}

json plan_to_json(const ReconciliationPlan& plan) {
    json entries = json::array();
    for (const auto& e : plan.entries) {
        entries.push_back(json{{"device_id", e.device_id},
                               {"desired", e.desired},
                               {"current", e.current},
                               {"decision", to_string(e.decision)},
                               {"reason", e.reason},
                               {"mode", optional_string(e.mode)}});
    }
    return json{{"created_at", to_millis(plan.created_at)},
                {"source_inference_seq",
                 plan.source_inference_seq ? json(*plan.source_inference_seq) : json(nullptr)},
                {"act_count", plan.act_count()},
                {"entries", std::move(entries)}};
}

ReconciliationPlan plan_from_json(const json& j) {
    ReconciliationPlan plan;
    plan.created_at = from_millis(j.at("created_at").get<std::int64_t>());
    if (!j.at("source_inference_seq").is_null()) plan.source_inference_seq = j["source_inference_seq"].get<std::uint64_t>();
    for (const auto& e : j.at("entries")) {
        plan.entries.push_back({e.at("device_id").get<std::string>(), e.at("desired").get<std::string>(),
                                e.at("current").get<std::string>(),
                                parse_decision(e.at("decision").get<std::string>()), e.at("reason").get<std::string>(),
                                read_optional_string(e, "mode")});
    }
    return plan;
}

json dispatch_to_json(const DispatchReport& r) {
    json entries = json::array();
    for (const auto& o : r.entries) {
        entries.push_back(json{{"device_id", o.device_id},
                               {"action", o.action},
                               {"sent", o.sent},
                               {"error", o.error},
                               {"sent_at", to_millis(o.sent_at)}});
    }
    return json{{"complete", r.complete}, {"sent_count", r.sent_count()}, {"entries", std::move(entries)}};
}

DispatchReport dispatch_from_json(const json& j) {
    DispatchReport r;
    r.complete = j.at("complete").get<bool>();
    for (const auto& o : j.at("entries")) {
        r.entries.push_back({o.at("device_id").get<std::string>(), o.at("action").get<std::string>(),
                             o.at("sent").get<bool>(), o.at("error").get<std::string>(),
                             from_millis(o.at("sent_at").get<std::int64_t>())});
    }
    return r;
}

// Stopwatch for one pipeline run; marks are offsets from its start.
class StageClock {
public:
    explicit StageClock(std::vector<StageMark>& marks) : marks_(marks), origin_(SteadyClock::now()) {}

    template <typename F>
    nanoseconds run(const char* stage, F&& body) {
        auto start = SteadyClock::now();
        marks_.push_back({stage, start - origin_, start - origin_});
        body();
        auto end = SteadyClock::now();
        marks_.back().end = end - origin_;
        return end - start;
    }

    nanoseconds elapsed() const { return SteadyClock::now() - origin_; }

private:
    std::vector<StageMark>& marks_;
    SteadyClock::time_point origin_;
};

} // namespace

json to_json(const InferenceTrace& t) {
    json snapshot = json::object();
    for (const auto& [id, value] : t.snapshot) snapshot[id] = value;
    json context = json::array();
    for (const auto& s : t.context) {
        context.push_back(json{{"text", s.text}, {"score", s.score}, {"source_seq", s.source_seq}});
    }
    json stages = json::array();
    for (const auto& m : t.stages) {
        stages.push_back(json{{"stage", m.stage}, {"start_ns", ns(m.start)}, {"end_ns", ns(m.end)}});
    }
    json out;
    out["trace_id"] = t.trace_id;
    out["session_id"] = t.session_id;
    out["user_command"] = t.user_command;
    out["status"] = to_string(t.status);
    out["error"] = t.error_code ? json{{"code", to_string(*t.error_code)}, {"message", t.error}} : json(nullptr);
    out["submitted_at"] = to_millis(t.submitted_at);
    out["finished_at"] = to_millis(t.finished_at);
    out["snapshot"] = std::move(snapshot);
    out["context"] = std::move(context);
    out["prompt"] = t.prompt ? json{{"text", t.prompt->text}, {"template_version", t.prompt->template_version}}
                             : json(nullptr);
    out["result"] = t.result ? json{{"raw_text", t.result->raw_text},
                                    {"latency_ns", ns(t.result->latency)},
                                    {"backend_id", t.result->backend_id}}
                             : json(nullptr);
    out["parsed"] = t.parsed ? parsed_to_json(*t.parsed) : json(nullptr);
    out["plan"] = t.plan ? plan_to_json(*t.plan) : json(nullptr);
    out["dispatch"] = t.dispatch ? dispatch_to_json(*t.dispatch) : json(nullptr);
    out["timings_ns"] = json{{"prompt_build", ns(t.timings.prompt_build)},
                             {"inference", ns(t.timings.inference)},
                             {"parse", ns(t.timings.parse)},
                             {"dispatch", ns(t.timings.dispatch)},
                             {"total", ns(t.timings.total)},
                             {"queued", ns(t.timings.queued)}};
    out["stages"] = std::move(stages);
    return out;
}

InferenceTrace trace_from_json(const json& j) {
    try {
        InferenceTrace t;
        t.trace_id = j.at("trace_id").get<std::string>();
        t.session_id = j.at("session_id").get<std::string>();
        t.user_command = j.at("user_command").get<std::string>();
        t.status = parse_trace_status(j.at("status").get<std::string>());
        if (!j.at("error").is_null()) {
            t.error_code = parse_error_code(j["error"].at("code").get<std::string>());
            t.error = j["error"].at("message").get<std::string>();
        }
        t.submitted_at = from_millis(j.at("submitted_at").get<std::int64_t>());
        t.finished_at = from_millis(j.at("finished_at").get<std::int64_t>());
        for (const auto& [id, value] : j.at("snapshot").items()) t.snapshot.emplace_back(id, value.get<std::string>());
        for (const auto& s : j.at("context")) {
            t.context.push_back({s.at("text").get<std::string>(), s.at("score").get<double>(),
                                 s.at("source_seq").get<std::uint64_t>()});
        }
        if (!j.at("prompt").is_null()) {
            t.prompt = StructuredPrompt{j["prompt"].at("text").get<std::string>(),
                                        j["prompt"].at("template_version").get<std::string>()};
        }
        if (!j.at("result").is_null()) {
            const auto& r = j["result"];
            t.result = InferenceResult{r.at("raw_text").get<std::string>(), nanoseconds{r.at("latency_ns").get<std::int64_t>()},
                                       r.at("backend_id").get<std::string>()};
        }
        if (!j.at("parsed").is_null()) t.parsed = parsed_from_json(j["parsed"]);
        if (!j.at("plan").is_null()) t.plan = plan_from_json(j["plan"]);
        if (!j.at("dispatch").is_null()) t.dispatch = dispatch_from_json(j["dispatch"]);
        const auto& tm = j.at("timings_ns");
        t.timings.prompt_build = nanoseconds{tm.at("prompt_build").get<std::int64_t>()};
        t.timings.inference = nanoseconds{tm.at("inference").get<std::int64_t>()};
        t.timings.parse = nanoseconds{tm.at("parse").get<std::int64_t>()};
        t.timings.dispatch = nanoseconds{tm.at("dispatch").get<std::int64_t>()};
        t.timings.total = nanoseconds{tm.at("total").get<std::int64_t>()};
        t.timings.queued = nanoseconds{tm.at("queued").get<std::int64_t>()};
        for (const auto& m : j.at("stages")) {
            t.stages.push_back({m.at("stage").get<std::string>(), nanoseconds{m.at("start_ns").get<std::int64_t>()},
                                nanoseconds{m.at("end_ns").get<std::int64_t>()}});
        }
        return t;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::schema_error, std::string("malformed trace: ") + e.what());
    }
}

std::string render_trace(const InferenceTrace& t) {
    std::string out = t.trace_id + " [" + std::string(to_string(t.status)) + "] " + t.user_command + "\n";
    if (t.error_code) out += "error (" + std::string(to_string(*t.error_code)) + "): " + t.error + "\n";
    if (t.result) out += "\nRaw output (" + t.result->backend_id + "):\n" + t.result->raw_text + "\n";
    if (t.parsed && t.plan) {
        if (t.parsed->repair_applied) out += "(response JSON was repaired)\n";
        out += "\n" + render_plan(*t.parsed, *t.plan);
    }
    if (t.dispatch) {
        for (const auto& o : t.dispatch->entries) {
            if (!o.sent) out += "not sent: " + o.device_id + " -> " + o.action + " (" + o.error + ")\n";
        }
    }
    return out;
}

json to_json(const DeviceView& v) {
    json out;
    out["id"] = v.descriptor.id;
    out["kind"] = to_string(v.descriptor.kind);
    out["capabilities"] = v.descriptor.capabilities;
    out["status_topic"] = v.descriptor.status_topic;
    out["command_topic"] = v.descriptor.command_topic;
    out["value"] = v.state.value;
    out["display"] = v.state.display();
    out["updated_at"] = to_millis(v.state.updated_at);
    out["source"] = to_string(v.state.source);
    out["pending"] = v.state.source == StateSource::assumed_after_command;
    return out;
}

json to_json(const HealthReport& h) {
    return json{{"status", h.healthy ? "ok" : "degraded"},
                {"broker", to_string(h.broker)},
                {"history", h.history_ok ? json("ok") : json(h.history_error)},
                {"devices", h.devices},
                {"traces", h.traces},
                {"event_subscribers", h.event_subscribers},
                {"undecodable_status", h.undecodable_status},
                {"registry",
                 json{{"applied", h.registry.applied},
                      {"duplicates", h.registry.duplicates},
                      {"stale", h.registry.stale},
                      {"unknown_device", h.registry.unknown_device},
                      {"rejected_value", h.registry.rejected_value}}}};
}

namespace {

json state_event(const DeviceState& s) {
    return json{{"type", "state"},
                {"device_id", s.device_id},
                {"value", s.value},
                {"updated_at", to_millis(s.updated_at)},
                {"source", to_string(s.source)}};
}

} // namespace

Gateway::Gateway(GatewayConfig config, GatewayDeps deps)
    : config_(std::move(config)), registry_(TopicScheme{config_.topic_prefix}) {
    config_.validate();
    for (const auto& d : config_.devices) registry_.register_device(d);

    history_ = config_.history_path.empty() ? std::make_unique<EventStore>()
                                            : std::make_unique<EventStore>(config_.history_path);
    replay_history();

    backend_ = deps.backend ? std::move(deps.backend) : make_backend(config_.backend);
    if (deps.publisher != nullptr) {
        publisher_ = deps.publisher;
    } else {
        transport_ = std::make_unique<Transport>(config_.broker, registry_.topics());
        publisher_ = transport_.get();
    }

    registry_listener_ = registry_.add_listener([this](const DeviceState& s) { hub_.publish(state_event(s).dump()); });
}

Gateway::~Gateway() {
    stop();
    registry_.remove_listener(registry_listener_);
    hub_.close_all();
}

void Gateway::replay_history() {
    std::uint64_t max_trace = 0;
    for (const auto& r : history_->records()) {
        switch (r.kind) {
        case EventKind::sensor: {
            StateValue v{r.payload["value"].get<std::string>(), std::nullopt,
                         r.payload.value("unit", std::string{})};
            if (r.payload.contains("numeric") && r.payload["numeric"].is_number()) v.numeric = r.payload["numeric"].get<double>();
            registry_.apply_status_update(*r.device_id, v, r.timestamp, StateSource::status_message);
            break;
        }
        case EventKind::dispatched_action:
            if (r.payload.value("sent", true)) {
                registry_.apply_status_update(*r.device_id, StateValue{r.payload["action"].get<std::string>(), {}, {}},
                                              r.timestamp, StateSource::assumed_after_command);
            }
            break;
        case EventKind::inference: {
            auto trace = trace_from_json(r.payload["trace"]);
            if (trace.trace_id.rfind("trace-", 0) == 0) {
                try {
                    max_trace = std::max<std::uint64_t>(max_trace, std::stoull(trace.trace_id.substr(6)));
                } catch (const std::exception&) {
                }
            }
            traces_.push_back(std::move(trace));
            break;
        }
        case EventKind::user_command:
            break;
        }
    }
    next_trace_ = max_trace + 1;
    if (!traces_.empty()) spdlog::info("restored {} traces from {}", traces_.size(), config_.history_path.string());
}

void Gateway::start() {
    if (started_) return;
    started_ = true;
    if (transport_) {
        transport_->subscribe_all([this](const StatusEvent& e) { ingest_status(e); });
        transport_->on_link_state([](mqtt::LinkState s) { spdlog::info("broker link {}", to_string(s)); });
        transport_->start();
    }
}

void Gateway::stop() {
    if (!started_) return;
    started_ = false;
    if (transport_) transport_->stop();
}

bool Gateway::wait_connected(std::chrono::milliseconds timeout) const {
    return transport_ ? transport_->wait_connected(timeout) : true;
}

void Gateway::ingest_status(const StatusEvent& event) {
    auto device = registry_.find(event.device_id);
    if (!device) {
        // Let the registry count it; devices may talk before they are registered.
        registry_.apply_status_update(event.device_id, StateValue{event.payload, {}, {}}, event.received_at);
        spdlog::debug("status for unknown device {}", event.device_id);
        return;
    }
    NormalizedReading reading;
    try {
        auto payload = decode_status_payload(event.payload);
        reading = normalize(payload.value, *device, payload.timestamp.value_or(event.received_at), config_.synonyms,
                            payload.unit);
    } catch (const Error& e) {
        ++undecodable_;
        spdlog::warn("dropping status from {}: {}", event.device_id, e.what());
        return;
    }
    std::lock_guard lock(history_mutex_);
    auto result = registry_.apply_status_update(reading.device_id, reading.state_value(), reading.timestamp);
    if (result.outcome != UpdateOutcome::applied) {
        if (result.outcome != UpdateOutcome::duplicate) {
            spdlog::debug("status {} from {}: {}", reading.value, reading.device_id, to_string(result.outcome));
        }
        return;
    }
    EventRecord record;
    record.kind = EventKind::sensor;
    record.timestamp = reading.timestamp;
    record.device_id = reading.device_id;
    record.payload["value"] = reading.value;
    if (reading.numeric) record.payload["numeric"] = *reading.numeric;
    if (!reading.unit.empty()) record.payload["unit"] = reading.unit;
    try {
        history_->append(std::move(record));
    } catch (const Error& e) {
        spdlog::error("history append failed: {}", e.what());
    }
}

std::shared_ptr<Gateway::Lane> Gateway::lane_for(const std::string& session_id) {
    std::lock_guard lock(lanes_mutex_);
    auto& lane = lanes_[session_id];
    if (!lane) lane = std::make_shared<Lane>();
    return lane;
}

InferenceTrace Gateway::submit_command(const std::string& session_id, const std::string& text) {
    auto lane = lane_for(session_id);
    auto arrived = SteadyClock::now();
    std::uint64_t ticket;
    {
        std::unique_lock lock(lane->mutex);
        // serving is the ticket currently running; everything above it waits.
        if (lane->next_ticket - lane->serving > config_.session_queue_depth) {
            throw Error(ErrorCode::session_busy, "session '" + session_id + "' already has " +
                                                     std::to_string(config_.session_queue_depth) + " queued commands");
        }
        ticket = lane->next_ticket++;
        lane->cv.wait(lock, [&] { return lane->serving == ticket; });
    }
    struct Release {
        Lane& lane;
        ~Release() {
            {
                std::lock_guard lock(lane.mutex);
                ++lane.serving;
            }
            lane.cv.notify_all();
        }
    } release{*lane};

    InferenceTrace trace;
    trace.session_id = session_id;
    trace.user_command = text;
    trace.submitted_at = now_ms();
    trace.timings.queued = SteadyClock::now() - arrived;
    {
        std::lock_guard lock(traces_mutex_);
        trace.trace_id = "trace-" + std::to_string(next_trace_++);
    }
    publish_trace_event(trace, "started");

    auto started = SteadyClock::now();
    run_pipeline(trace, text);
    trace.finished_at = now_ms();
    trace.timings.total = SteadyClock::now() - started;
    journal(trace);

    {
        std::lock_guard lock(traces_mutex_);
        traces_.push_back(trace);
    }
    publish_trace_event(trace, "finished");
    return trace;
}

void Gateway::run_pipeline(InferenceTrace& trace, const std::string& text) {
    StageClock clock(trace.stages);
    auto fail = [&](TraceStatus status, const Error& e) {
        trace.status = status;
        trace.error_code = e.code();
        trace.error = e.what();
    };

    std::string command;
    try {
        clock.run("sanitize", [&] { command = sanitize_user_command(text, config_.prompt.max_command_length); });
    } catch (const Error& e) {
        fail(TraceStatus::rejected_input, e);
        return;
    }

    StateSnapshot snapshot;
    try {
        trace.timings.prompt_build = clock.run("prompt_build", [&] {
            snapshot = registry_.snapshot();
            trace.snapshot = snapshot.values();
            PromptBundle bundle;
            bundle.user_command = command;
            for (const auto& d : registry_.list_devices()) bundle.devices.push_back(d.id);
            bundle.current_sensor_values = trace.snapshot;
            if (config_.prompt.context_block) {
                trace.context = history_->retrieve_context(command, bundle.devices, config_.prompt.context_limit,
                                                           now_ms());
                bundle.context_snippets = trace.context;
            }
            trace.prompt = build_structured_prompt(bundle, PromptOptions{config_.prompt.context_block});
        });
    } catch (const Error& e) {
        fail(TraceStatus::rejected_input, e);
        return;
    }

    try {
        clock.run("inference", [&] { trace.result = backend_->generate(*trace.prompt); });
        trace.timings.inference = trace.result->latency;
    } catch (const Error& e) {
        trace.timings.inference = trace.stages.back().end - trace.stages.back().start;
        fail(TraceStatus::backend_error, e);
        return;
    }

    try {
        trace.timings.parse = clock.run("parse", [&] {
            trace.parsed = canonicalize(parse_response(trace.result->raw_text), registry_, config_.synonyms);
            auto devices = registry_.list_devices();
            trace.plan = plan(*trace.parsed, snapshot, devices, now_ms());
        });
    } catch (const Error& e) {
        fail(TraceStatus::parse_error, e);
        return;
    }

    trace.timings.dispatch = clock.run("dispatch", [&] { trace.dispatch = dispatch(*trace.plan, *publisher_, registry_); });
    if (!trace.dispatch->complete) {
        trace.status = TraceStatus::dispatch_error;
        trace.error_code = ErrorCode::backpressure;
        for (const auto& o : trace.dispatch->entries) {
            if (!o.sent) {
                trace.error = o.error;
                break;
            }
        }
    }
}

void Gateway::journal(InferenceTrace& trace) {
    std::lock_guard lock(history_mutex_);
    try {
        if (trace.prompt) {
            EventRecord cmd;
            cmd.kind = EventKind::user_command;
            cmd.timestamp = trace.submitted_at;
            cmd.payload["text"] = trace.user_command;
            cmd.payload["session_id"] = trace.session_id;
            cmd.payload["trace_id"] = trace.trace_id;
            history_->append(std::move(cmd));
        }
        auto seq = history_->next_seq();
        if (trace.plan) trace.plan->source_inference_seq = seq;
        EventRecord inference;
        inference.kind = EventKind::inference;
        inference.timestamp = trace.finished_at;
        inference.payload["trace"] = to_json(trace);
        history_->append(std::move(inference));
        if (!trace.dispatch) return;
        for (const auto& o : trace.dispatch->entries) {
            if (!o.sent) continue;
            EventRecord action;
            action.kind = EventKind::dispatched_action;
            action.timestamp = o.sent_at;
            action.device_id = o.device_id;
            action.payload["inference_seq"] = seq;
            action.payload["action"] = o.action;
            action.payload["trace_id"] = trace.trace_id;
            history_->append(std::move(action));
        }
    } catch (const Error& e) {
        spdlog::error("history append failed for {}: {}", trace.trace_id, e.what());
    }
}

void Gateway::publish_trace_event(const InferenceTrace& trace, std::string_view phase) {
    json event{{"type", "trace"},
               {"phase", phase},
               {"trace_id", trace.trace_id},
               {"session_id", trace.session_id},
               {"user_command", trace.user_command}};
    if (phase == "finished") {
        event["status"] = to_string(trace.status);
        event["act_count"] = trace.plan ? trace.plan->act_count() : 0;
    }
    hub_.publish(event.dump());
}

std::vector<DeviceView> Gateway::get_devices() const {
    std::vector<DeviceView> out;
    auto snapshot = registry_.snapshot();
    for (const auto& d : registry_.list_devices()) {
        const auto* s = snapshot.find(d.id);
        DeviceState state;
        state.device_id = d.id;
        out.push_back({d, s != nullptr ? *s : state});
    }
    return out;
}

InferenceTrace Gateway::get_trace(const std::string& trace_id) const {
    std::lock_guard lock(traces_mutex_);
    for (const auto& t : traces_) {
        if (t.trace_id == trace_id) return t;
    }
    throw Error(ErrorCode::not_found, "no trace '" + trace_id + "'");
}

std::vector<InferenceTrace> Gateway::list_traces(const std::string& session_id) const {
    std::lock_guard lock(traces_mutex_);
    std::vector<InferenceTrace> out;
    for (auto it = traces_.rbegin(); it != traces_.rend(); ++it) {
        if (session_id.empty() || it->session_id == session_id) out.push_back(*it);
    }
    return out;
}

std::shared_ptr<EventSubscription> Gateway::subscribe_events(std::size_t capacity) { return hub_.subscribe(capacity); }

HealthReport Gateway::health() const {
    HealthReport h;
    h.broker = transport_ ? transport_->state() : mqtt::LinkState::connected;
    h.history_ok = history_->healthy();
    h.history_error = history_->last_error();
    h.devices = registry_.list_devices().size();
    {
        std::lock_guard lock(traces_mutex_);
        h.traces = traces_.size();
    }
    h.event_subscribers = hub_.subscriber_count();
    h.undecodable_status = undecodable_.load();
    h.registry = registry_.counters();
    h.healthy = h.broker == mqtt::LinkState::connected && h.history_ok;
    return h;
}

std::optional<AggregateValue> Gateway::aggregate(const std::string& device_id, std::chrono::milliseconds window,
                                                 AggregateFn fn, Timestamp now) const {
    auto device = registry_.find(device_id);
    if (!device) throw Error(ErrorCode::unknown_device, "unknown device '" + device_id + "'");
    std::vector<NormalizedReading> readings;
    for (const auto& r : history_->records()) {
        if (r.kind != EventKind::sensor || r.device_id != device_id) continue;
        NormalizedReading n;
        n.device_id = device_id;
        n.value = r.payload["value"].get<std::string>();
        if (r.payload.contains("numeric")) n.numeric = r.payload["numeric"].get<double>();
        n.unit = r.payload.value("unit", std::string{});
        n.timestamp = r.timestamp;
        readings.push_back(std::move(n));
    }
    return aggregate_window(readings, *device, TimeWindow::ending_at(now, window), fn);
}

} // namespace edgetalk
