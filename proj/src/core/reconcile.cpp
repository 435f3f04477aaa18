#include "edgetalk/reconcile.hpp"

#include <algorithm>
#include <cctype>

namespace edgetalk {

std::string_view to_string(Decision decision) {
    switch (decision) {
    case Decision::act: return "act";
    case Decision::skip_same: return "skip_same";
    case Decision::skip_unsupported: return "skip_unsupported";
    case Decision::skip_unknown_device: return "skip_unknown_device";
    }
    return "act";
}

Decision parse_decision(std::string_view text) {
    if (text == "act") return Decision::act;
    if (text == "skip_same") return Decision::skip_same;
    if (text == "skip_unsupported") return Decision::skip_unsupported;
    if (text == "skip_unknown_device") return Decision::skip_unknown_device;
    throw Error(ErrorCode::invalid_argument, "unknown decision: " + std::string(text));
}

namespace {

std::string upper(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::toupper(c); });
    return s;
}

std::string title(std::string s) {
    if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
    return s;
}

} // namespace

std::size_t ReconciliationPlan::act_count() const {
    return static_cast<std::size_t>(
        std::count_if(entries.begin(), entries.end(), [](const PlanEntry& e) { return e.decision == Decision::act; }));
}

ReconciliationPlan plan(const ParsedResponse& parsed, const StateSnapshot& snapshot,
                        std::span<const DeviceDescriptor> devices, Timestamp created_at) {
    ReconciliationPlan out;
    out.created_at = created_at;
    for (const auto& cmd : parsed.commands) {
        PlanEntry e;
        e.device_id = cmd.device;
        e.desired = cmd.action;
        e.mode = cmd.mode;
        auto device = std::find_if(devices.begin(), devices.end(),
                                   [&](const DeviceDescriptor& d) { return d.id == cmd.device; });
        const auto* state = snapshot.find(cmd.device);
        e.current = state != nullptr ? state->value : std::string(kUnknownValue);
        if (device == devices.end()) {
            e.decision = Decision::skip_unknown_device;
            e.reason = "Unknown device " + cmd.device;
        } else if (!device->accepts(cmd.action)) {
            e.decision = Decision::skip_unsupported;
            e.reason = "No action needed for " + cmd.device;
        } else if (cmd.action == e.current) {
            e.decision = Decision::skip_same;
            e.reason = "No action needed for " + cmd.device;
        } else {
            e.decision = Decision::act;
            e.reason = "Turning " + upper(cmd.action) + " " + cmd.device;
        }
        out.entries.push_back(std::move(e));
    }
    return out;
}

ReconciliationPlan plan(const ParsedResponse& parsed, const StateSnapshot& snapshot, const Registry& registry) {
    auto devices = registry.list_devices();
    return plan(parsed, snapshot, devices, now_ms());
}

std::size_t DispatchReport::sent_count() const {
    return static_cast<std::size_t>(
        std::count_if(entries.begin(), entries.end(), [](const DispatchOutcome& o) { return o.sent; }));
}

DispatchReport dispatch(const ReconciliationPlan& plan, CommandPublisher& publisher, Registry& registry) {
    DispatchReport report;
    for (const auto& entry : plan.entries) {
        if (entry.decision != Decision::act) continue;
        DispatchOutcome outcome{entry.device_id, entry.desired, false, {}, {}};
        if (report.complete) {
            try {
                publisher.publish_command(entry.device_id, entry.desired);
                outcome.sent = true;
                outcome.sent_at = now_ms();
                registry.apply_status_update(entry.device_id, StateValue{entry.desired, std::nullopt, {}}, outcome.sent_at,
                                             StateSource::assumed_after_command);
            } catch (const Error& e) {
                report.complete = false;
                outcome.error = e.what();
            }
        } else {
            outcome.error = "not attempted after earlier failure";
        }
        report.entries.push_back(std::move(outcome));
    }
    return report;
}

std::string render_plan(const ParsedResponse& parsed, const ReconciliationPlan& plan) {
    std::string out = "Description: " + parsed.description + "\n\nCommands:\n";
    for (const auto& e : plan.entries) {
        out += "\nDevice: " + e.device_id + " | Desired: " + e.desired + " | Current: " + e.current + "\n";
        out += e.reason + "\n";
    }
    out += "\nFinal Action\n";
    bool any = false;
    for (const auto& e : plan.entries) {
        if (e.decision != Decision::act) continue;
        out += upper(e.device_id) + " = Turn " + title(e.desired) + "\n";
        any = true;
    }
    if (!any) out += "none\n";
    return out;
}

} // namespace edgetalk
