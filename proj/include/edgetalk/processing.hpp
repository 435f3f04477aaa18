#pragma once

#include "edgetalk/device.hpp"
#include "edgetalk/registry.hpp"

#include <chrono>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace edgetalk {

// Maps free-form action words onto canonical lowercase actions.
// Lookup is case-insensitive and whitespace-collapsing.
class SynonymTable {
public:
    SynonymTable() = default;

    // on  <- on, 1, true, turn on, switch on, power on
    // off <- off, 0, false, turn off, switch off, power off
    static SynonymTable defaults();

    void add(const std::string& canonical, const std::string& synonym);
    std::optional<std::string> lookup(std::string_view word) const;
    // Canonical form if known, otherwise the folded word itself.
    std::string canonicalize(std::string_view word) const;

    const std::map<std::string, std::vector<std::string>>& entries() const { return entries_; }

private:
    std::map<std::string, std::vector<std::string>> entries_; // canonical -> synonyms
    std::map<std::string, std::string, std::less<>> reverse_;
};

// Lowercase, trim and collapse inner whitespace runs to one space.
std::string fold_word(std::string_view word);

bool is_valid_utf8(std::string_view text);

struct NormalizedReading {
    std::string device_id;
    std::string value; // canonical action, or the numeric value rendered shortest
    std::optional<double> numeric;
    std::string unit;
    Timestamp timestamp{};
    bool canonical = true;    // false: actuator value not in the synonym table
    bool unit_known = true;   // false: numeric reading with an unrecognized unit

    StateValue state_value() const { return {value, numeric, unit}; }
    bool same_value(const NormalizedReading& other) const {
        return value == other.value && numeric == other.numeric && unit == other.unit;
    }
};

// Throws decode_error when the payload is not valid UTF-8.
NormalizedReading normalize(std::string_view raw, const DeviceDescriptor& device, Timestamp timestamp,
                            const SynonymTable& synonyms, std::string_view unit_hint = {});

// Collapses consecutive readings with identical values, keeping the first.
std::vector<NormalizedReading> dedupe(std::span<const NormalizedReading> readings);

enum class AggregateFn { last, mean, min, max };
AggregateFn parse_aggregate_fn(std::string_view text);

struct TimeWindow {
    Timestamp begin;
    Timestamp end; // inclusive

    static TimeWindow ending_at(Timestamp end, std::chrono::milliseconds length) { return {end - length, end}; }
    bool contains(Timestamp t) const { return t >= begin && t <= end; }
};

struct AggregateValue {
    std::string value;
    std::optional<double> numeric;
    std::string unit;
};

// Summary over the readings for `device` that fall inside `window`.
// mean/min/max need a numeric (sensor) device: type_error otherwise.
// An empty window yields nullopt.
std::optional<AggregateValue> aggregate_window(std::span<const NormalizedReading> readings,
                                               const DeviceDescriptor& device, TimeWindow window, AggregateFn fn);

std::string format_number(double value);

} // namespace edgetalk
