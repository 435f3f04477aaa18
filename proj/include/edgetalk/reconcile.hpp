#pragma once

#include "edgetalk/parser.hpp"
#include "edgetalk/registry.hpp"
#include "edgetalk/transport.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace edgetalk {

enum class Decision { act, skip_same, skip_unsupported, skip_unknown_device };

std::string_view to_string(Decision decision);
Decision parse_decision(std::string_view text);

struct PlanEntry {
    std::string device_id;
    std::string desired;
    std::string current;
    Decision decision = Decision::skip_same;
    std::string reason;
    std::optional<std::string> mode;

    bool operator==(const PlanEntry&) const = default;
};

struct ReconciliationPlan {
    std::vector<PlanEntry> entries; // one per parsed command, same order
    Timestamp created_at{};
    std::optional<std::uint64_t> source_inference_seq;

    std::size_t act_count() const;
};

// Per command, first match wins: unregistered device -> skip_unknown_device,
// action outside the capability set -> skip_unsupported, desired == current ->
// skip_same, otherwise act. Pure: depends only on its arguments.
ReconciliationPlan plan(const ParsedResponse& parsed, const StateSnapshot& snapshot,
                        std::span<const DeviceDescriptor> devices, Timestamp created_at);
ReconciliationPlan plan(const ParsedResponse& parsed, const StateSnapshot& snapshot, const Registry& registry);

struct DispatchOutcome {
    std::string device_id;
    std::string action;
    bool sent = false;
    std::string error;
    Timestamp sent_at{};

    bool operator==(const DispatchOutcome&) const = default;
};

struct DispatchReport {
    std::vector<DispatchOutcome> entries; // act entries only, plan order
    bool complete = true;                 // false if a publish failed

    std::size_t sent_count() const;
};

// Publishes the act entries in plan order and records the optimistic state for
// each one sent. Stops at the first publish failure; the rest are reported as
// not sent and are not retried.
DispatchReport dispatch(const ReconciliationPlan& plan, CommandPublisher& publisher, Registry& registry);

// Human-readable log of a plan, one block per device plus the final actions.
std::string render_plan(const ParsedResponse& parsed, const ReconciliationPlan& plan);

} // namespace edgetalk
