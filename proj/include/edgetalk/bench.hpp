#pragma once

#include "edgetalk/gateway.hpp"
#include "edgetalk/mqtt.hpp"
#include "edgetalk/simulator.hpp"

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace edgetalk {

using DeviceValues = std::vector<std::pair<std::string, std::string>>; // catalog order

struct ScenarioStep {
    std::string command;
    DeviceValues initial_states;  // every device
    DeviceValues expected_states; // subset of the devices
};

struct Scenario {
    std::string name;
    std::string backend_label;
    std::vector<DeviceDescriptor> devices;
    std::filesystem::path script_path; // scripted backend; empty means `backend` below
    std::optional<BackendConfig> backend;
    std::chrono::milliseconds actuation_delay{50};
    std::vector<ScenarioStep> steps;

    void validate() const; // config_error
};

// One structured document; relative script paths resolve against `base_dir`.
Scenario parse_scenario(std::string_view json_text, const std::filesystem::path& base_dir = {});
Scenario load_scenario(const std::filesystem::path& path);

struct StepResult {
    std::string command;
    DeviceValues expected;
    DeviceValues observed;            // fleet ground truth, same keys as expected
    std::vector<bool> per_device_match; // parallel to expected
    std::size_t matched = 0;
    bool converged = true;            // plan targets reached before the timeout
    std::string trace_status;
    std::string trace_id;
    std::size_t act_count = 0;
    std::chrono::nanoseconds latency{0};    // backend latency
    std::chrono::nanoseconds end_to_end{0}; // whole pipeline
};

struct BenchReport {
    std::string scenario;
    std::string backend;
    std::vector<StepResult> steps;

    std::size_t matched() const;
    std::size_t total() const;
    std::optional<double> accuracy() const; // absent with no device-states
    std::optional<std::chrono::nanoseconds> mean_latency() const;
    std::optional<std::chrono::nanoseconds> min_latency() const;
    std::optional<std::chrono::nanoseconds> max_latency() const;
};

struct BenchOptions {
    // External broker; when unset an in-process broker on a free port is used.
    std::optional<std::string> broker_host;
    std::optional<int> broker_port;
    std::chrono::milliseconds convergence_timeout{10000};
    std::chrono::milliseconds sync_timeout{2000};
};

// Owns broker (optional), fleet and gateway for one scenario.
class BenchHarness {
public:
    BenchHarness(const Scenario& scenario, BenchOptions options = {});
    ~BenchHarness();

    // Reset fleet, wait until the gateway sees the initial states, submit,
    // wait for the plan targets, score.
    StepResult run_step(const ScenarioStep& step);

    Gateway& gateway() { return *gateway_; }
    Fleet& fleet() { return *fleet_; }

    // Commands seen by the broker on command topics, per device.
    std::map<std::string, std::size_t> command_publishes() const;
    std::size_t total_command_publishes() const;

    // Until the gateway's registry shows `values`.
    bool wait_gateway_state(const std::map<std::string, std::string>& values, std::chrono::milliseconds timeout);

private:
    Scenario scenario_;
    BenchOptions options_;
    std::unique_ptr<mqtt::Broker> broker_;
    std::unique_ptr<Fleet> fleet_;
    std::unique_ptr<Gateway> gateway_;
    mutable std::mutex publishes_mutex_;
    std::map<std::string, std::size_t> publishes_;
};

BenchReport run_scenario(const Scenario& scenario, const BenchOptions& options = {});

enum class ReportFormat { table, records };
ReportFormat parse_report_format(std::string_view text);

// Deterministic rendering; include_timing=false blanks the latency columns so
// two runs of a scripted scenario compare byte for byte.
std::string emit_report(const BenchReport& report, ReportFormat format, bool include_timing = true);

} // namespace edgetalk
