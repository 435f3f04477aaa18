#include "edgetalk/bench.hpp"

#include "json.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

namespace edgetalk {

namespace {

using json = nlohmann::json;
using SteadyClock = std::chrono::steady_clock;

[[noreturn]] void fail(const std::string& what) { throw Error(ErrorCode::config_error, what); }

// Object of device -> value, reordered into catalog order.
DeviceValues ordered_values(const json& obj, const std::vector<DeviceDescriptor>& devices, const std::string& where) {
    if (!obj.is_object()) fail(where + " must be an object of device -> value");
    DeviceValues out;
    std::set<std::string> seen;
    for (const auto& d : devices) {
        if (obj.contains(d.id)) {
            if (!obj[d.id].is_string()) fail(where + "." + d.id + " must be a string");
            out.emplace_back(d.id, obj[d.id].get<std::string>());
            seen.insert(d.id);
        }
    }
    for (const auto& [key, value] : obj.items()) {
        if (!seen.count(key)) fail(where + " names unknown device '" + key + "'");
    }
    return out;
}

std::map<std::string, std::string> as_map(const DeviceValues& values) { return {values.begin(), values.end()}; }

std::string format_ms(std::chrono::nanoseconds d) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", std::chrono::duration<double, std::milli>(d).count());
    return buf;
}

std::string join_values(const DeviceValues& values) {
    std::string out;
    for (const auto& [id, value] : values) {
        if (!out.empty()) out += ", ";
        out += id + ": " + value;
    }
    return out;
}

} // namespace

void Scenario::validate() const {
    if (name.empty()) fail("scenario needs a name");
    if (devices.empty()) fail("scenario " + name + " has no devices");
    if (script_path.empty() && !backend) fail("scenario " + name + " needs a script or a backend");
    std::set<std::string> ids;
    for (const auto& d : devices) {
        if (!ids.insert(d.id).second) fail("scenario " + name + ": duplicate device '" + d.id + "'");
    }
    for (std::size_t i = 0; i < steps.size(); ++i) {
        const auto& s = steps[i];
        auto where = "scenario " + name + " step " + std::to_string(i + 1);
        if (s.command.empty()) fail(where + ": empty command");
        if (s.initial_states.size() != devices.size()) fail(where + ": initial_states must cover every device");
        for (const auto& [id, value] : s.expected_states) {
            if (!ids.count(id)) fail(where + ": expected state for unknown device '" + id + "'");
        }
    }
}

Scenario parse_scenario(std::string_view json_text, const std::filesystem::path& base_dir) {
    auto root = json::parse(json_text, nullptr, false);
    if (root.is_discarded() || !root.is_object()) fail("scenario is not a JSON object");
    Scenario s;
    try {
        s.name = root.at("name").get<std::string>();
        s.backend_label = root.value("backend_label", s.name);
        if (root.contains("script")) {
            std::filesystem::path p = root["script"].get<std::string>();
            s.script_path = p.is_absolute() || base_dir.empty() ? p : base_dir / p;
        }
        if (root.contains("backend")) {
            const auto& b = root["backend"];
            BackendConfig cfg;
            cfg.endpoint = b.value("endpoint", cfg.endpoint);
            cfg.model_name = b.value("model", cfg.model_name);
            if (b.contains("timeout_seconds")) {
                cfg.timeout = std::chrono::milliseconds{static_cast<std::int64_t>(b["timeout_seconds"].get<double>() * 1000)};
            }
            s.backend = cfg;
        }
        s.actuation_delay = std::chrono::milliseconds{root.value<std::int64_t>("actuation_delay_ms", 50)};
        std::size_t i = 0;
        for (const auto& d : root.at("devices")) {
            DeviceDescriptor desc;
            desc.id = d.at("id").get<std::string>();
            desc.kind = parse_device_kind(d.value("kind", "other"));
            desc.capabilities = d.value("capabilities", std::vector<std::string>{});
            s.devices.push_back(std::move(desc));
            ++i;
        }
        i = 0;
        for (const auto& st : root.at("steps")) {
            auto where = "steps[" + std::to_string(i++) + "]";
            ScenarioStep step;
            step.command = st.at("command").get<std::string>();
            step.initial_states = ordered_values(st.at("initial_states"), s.devices, where + ".initial_states");
            step.expected_states = ordered_values(st.at("expected_states"), s.devices, where + ".expected_states");
            s.steps.push_back(std::move(step));
        }
    } catch (const json::exception& e) {
        fail(std::string("malformed scenario: ") + e.what());
    }
    s.validate();
    return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::io_error, "cannot read scenario " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    try {
        return parse_scenario(buf.str(), path.parent_path());
    } catch (const Error& e) {
        throw Error(e.code(), path.string() + ": " + e.what());
    }
}

std::size_t BenchReport::matched() const {
    std::size_t n = 0;
    for (const auto& s : steps) n += s.matched;
    return n;
}

std::size_t BenchReport::total() const {
    std::size_t n = 0;
    for (const auto& s : steps) n += s.expected.size();
    return n;
}

std::optional<double> BenchReport::accuracy() const {
    if (total() == 0) return std::nullopt;
    return static_cast<double>(matched()) / static_cast<double>(total());
}

std::optional<std::chrono::nanoseconds> BenchReport::mean_latency() const {
    if (steps.empty()) return std::nullopt;
    std::chrono::nanoseconds sum{0};
    for (const auto& s : steps) sum += s.latency;
    return sum / static_cast<std::int64_t>(steps.size());
}

std::optional<std::chrono::nanoseconds> BenchReport::min_latency() const {
    if (steps.empty()) return std::nullopt;
    return std::min_element(steps.begin(), steps.end(), [](auto& a, auto& b) { return a.latency < b.latency; })->latency;
}

std::optional<std::chrono::nanoseconds> BenchReport::max_latency() const {
    if (steps.empty()) return std::nullopt;
    return std::max_element(steps.begin(), steps.end(), [](auto& a, auto& b) { return a.latency < b.latency; })->latency;
}

BenchHarness::BenchHarness(const Scenario& scenario, BenchOptions options)
    : scenario_(scenario), options_(std::move(options)) {
    scenario_.validate();
    BrokerConfig broker;
    if (options_.broker_port) {
        broker.host = options_.broker_host.value_or("127.0.0.1");
        broker.port = *options_.broker_port;
    } else {
        broker_ = std::make_unique<mqtt::Broker>("127.0.0.1", 0);
        TopicScheme scheme;
        broker_->set_publish_observer([this, scheme](const mqtt::Message& m) {
            auto parsed = scheme.parse(m.topic);
            if (!parsed || parsed->direction != TopicDirection::command) return;
            std::lock_guard lock(publishes_mutex_);
            ++publishes_[parsed->device_id];
        });
        broker_->start();
        broker.host = "127.0.0.1";
        broker.port = broker_->port();
    }
    broker.backoff_initial = std::chrono::milliseconds{50};
    broker.backoff_max = std::chrono::milliseconds{500};

    std::vector<SimDeviceConfig> sims;
    for (const auto& d : scenario_.devices) {
        SimDeviceConfig sim;
        sim.descriptor = d;
        sim.actuation_delay = scenario_.actuation_delay;
        sim.initial_value = std::string(kUnknownValue);
        if (!scenario_.steps.empty()) sim.initial_value = as_map(scenario_.steps.front().initial_states).at(d.id);
        sims.push_back(std::move(sim));
    }
    fleet_ = std::make_unique<Fleet>(std::move(sims), broker);

    GatewayConfig cfg;
    cfg.broker = broker;
    cfg.broker.client_id = "edgetalk-bench-gateway";
    cfg.devices = scenario_.devices;
    if (!scenario_.script_path.empty()) {
        cfg.backend.kind = BackendConfig::Kind::scripted;
        cfg.backend.script_path = scenario_.script_path;
    } else {
        cfg.backend = *scenario_.backend;
    }
    gateway_ = std::make_unique<Gateway>(cfg);

    gateway_->start();
    fleet_->start();
    constexpr std::chrono::seconds kConnect{5};
    if (!gateway_->wait_connected(kConnect) || !fleet_->wait_connected(kConnect)) {
        throw Error(ErrorCode::io_error, "bench: could not connect to broker " + broker.host + ":" +
                                             std::to_string(broker.port));
    }
}

BenchHarness::~BenchHarness() {
    if (gateway_) gateway_->stop();
    if (fleet_) fleet_->stop();
    if (broker_) broker_->stop();
}

std::map<std::string, std::size_t> BenchHarness::command_publishes() const {
    std::lock_guard lock(publishes_mutex_);
    return publishes_;
}

std::size_t BenchHarness::total_command_publishes() const {
    std::size_t n = 0;
    for (const auto& [id, count] : command_publishes()) n += count;
    return n;
}

bool BenchHarness::wait_gateway_state(const std::map<std::string, std::string>& values,
                                      std::chrono::milliseconds timeout) {
    auto deadline = SteadyClock::now() + timeout;
    while (true) {
        auto snapshot = gateway_->registry().snapshot();
        bool all = std::all_of(values.begin(), values.end(), [&](const auto& kv) {
            const auto* s = snapshot.find(kv.first);
            return s != nullptr && s->value == kv.second;
        });
        if (all) return true;
        if (SteadyClock::now() >= deadline) return false;
        std::this_thread::sleep_for(std::chrono::milliseconds(2));
    }
}

StepResult BenchHarness::run_step(const ScenarioStep& step) {
    StepResult r;
    r.command = step.command;
    r.expected = step.expected_states;

    auto initial = as_map(step.initial_states);
    fleet_->reset(initial);
    bool synced = wait_gateway_state(initial, options_.sync_timeout);

    auto trace = gateway_->submit_command("bench", step.command);
    r.trace_id = trace.trace_id;
    r.trace_status = std::string(to_string(trace.status));
    if (trace.result) r.latency = trace.result->latency;
    r.end_to_end = trace.timings.total;

    std::map<std::string, std::string> targets;
    if (trace.plan) {
        r.act_count = trace.plan->act_count();
        for (const auto& e : trace.plan->entries) {
            if (e.decision == Decision::act) targets[e.device_id] = e.desired;
        }
    }
    r.converged = synced && fleet_->wait_for(targets, options_.convergence_timeout);

    auto truth = fleet_->fleet_state();
    for (const auto& [id, want] : r.expected) {
        auto it = truth.find(id);
        auto got = it != truth.end() ? it->second : std::string(kUnknownValue);
        r.observed.emplace_back(id, got);
        r.per_device_match.push_back(got == want);
        if (got == want) ++r.matched;
    }
    return r;
}

BenchReport run_scenario(const Scenario& scenario, const BenchOptions& options) {
    BenchReport report;
    report.scenario = scenario.name;
    report.backend = scenario.backend_label;
    if (scenario.steps.empty()) {
        scenario.validate();
        return report;
    }
    BenchHarness harness(scenario, options);
    for (const auto& step : scenario.steps) report.steps.push_back(harness.run_step(step));
    return report;
}

ReportFormat parse_report_format(std::string_view text) {
    if (text == "table") return ReportFormat::table;
    if (text == "records") return ReportFormat::records;
    throw Error(ErrorCode::invalid_argument, "report format must be table or records, not " + std::string(text));
}

std::string emit_report(const BenchReport& report, ReportFormat format, bool include_timing) {
    std::ostringstream out;
    if (format == ReportFormat::records) {
        for (std::size_t i = 0; i < report.steps.size(); ++i) {
            const auto& s = report.steps[i];
            nlohmann::ordered_json line;
            line["scenario"] = report.scenario;
            line["backend"] = report.backend;
            line["step"] = i + 1;
            line["command"] = s.command;
            line["expected"] = nlohmann::ordered_json::object();
            line["observed"] = nlohmann::ordered_json::object();
            line["per_device_match"] = nlohmann::ordered_json::object();
            for (std::size_t k = 0; k < s.expected.size(); ++k) {
                line["expected"][s.expected[k].first] = s.expected[k].second;
                line["observed"][s.observed[k].first] = s.observed[k].second;
                line["per_device_match"][s.expected[k].first] = static_cast<bool>(s.per_device_match[k]);
            }
            line["matched"] = s.matched;
            line["total"] = s.expected.size();
            line["converged"] = s.converged;
            line["trace_status"] = s.trace_status;
            line["act_count"] = s.act_count;
            if (include_timing) {
                line["latency_ms"] = std::chrono::duration<double, std::milli>(s.latency).count();
                line["end_to_end_ms"] = std::chrono::duration<double, std::milli>(s.end_to_end).count();
            }
            out << line.dump() << "\n";
        }
        return out.str();
    }

    out << "Scenario: " << report.scenario << " (" << report.backend << ")\n";
    out << "| # | Command | Expected | Observed | Match | Time (ms) |\n";
    out << "|---|---------|----------|----------|-------|-----------|\n";
    for (std::size_t i = 0; i < report.steps.size(); ++i) {
        const auto& s = report.steps[i];
        std::string observed;
        for (std::size_t k = 0; k < s.observed.size(); ++k) {
            if (!observed.empty()) observed += ", ";
            observed += s.observed[k].first + ": " + s.observed[k].second;
            if (!s.per_device_match[k]) observed += " (x)";
        }
        out << "| " << i + 1 << " | " << s.command << " | " << join_values(s.expected) << " | " << observed << " | "
            << s.matched << "/" << s.expected.size() << (s.converged ? "" : " timeout") << " | "
            << (include_timing ? format_ms(s.latency) : "-") << " |\n";
    }
    out << "\nDevice-state accuracy: ";
    if (auto acc = report.accuracy()) {
        char buf[16];
        std::snprintf(buf, sizeof buf, "%.3f", *acc);
        out << report.matched() << "/" << report.total() << " (" << buf << ")\n";
    } else {
        out << "n/a\n";
    }
    if (include_timing && report.mean_latency()) {
        out << "Backend latency ms: mean " << format_ms(*report.mean_latency()) << ", min "
            << format_ms(*report.min_latency()) << ", max " << format_ms(*report.max_latency()) << "\n";
    }
    return out.str();
}

} // namespace edgetalk
