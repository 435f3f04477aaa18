#include "edgetalk/processing.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <limits>

namespace edgetalk {

namespace {

constexpr std::array kKnownUnits = {"°C", "°F", "C", "F", "K", "%", "lx", "hPa", "Pa", "ppm", "W", "kW", "kWh", "V", "A", "dB", "s", "m"};

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; }

std::string_view trim(std::string_view s) {
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return s;
}

std::optional<std::pair<double, std::string_view>> parse_leading_number(std::string_view s) {
    double value = 0;
    const char* begin = s.data();
    if (!s.empty() && s.front() == '+') ++begin;
    auto [ptr, ec] = std::from_chars(begin, s.data() + s.size(), value);
    if (ec != std::errc{} || ptr == begin || !std::isfinite(value)) return std::nullopt;
    return std::make_pair(value, trim(std::string_view(ptr, static_cast<std::size_t>(s.data() + s.size() - ptr))));
}

} // namespace

std::string fold_word(std::string_view word) {
    std::string out;
    bool pending_space = false;
    for (char c : trim(word)) {
        if (is_space(c)) {
            pending_space = true;
            continue;
        }
        if (pending_space) out.push_back(' ');
        pending_space = false;
        out.push_back(static_cast<char>(c >= 'A' && c <= 'Z' ? c - 'A' + 'a' : c));
    }
    return out;
}

SynonymTable SynonymTable::defaults() {
    SynonymTable t;
    for (const char* w : {"on", "1", "true", "turn on", "switch on", "power on"}) t.add("on", w);
    for (const char* w : {"off", "0", "false", "turn off", "switch off", "power off"}) t.add("off", w);
    return t;
}

void SynonymTable::add(const std::string& canonical, const std::string& synonym) {
    auto canon = fold_word(canonical);
    auto syn = fold_word(synonym);
    if (canon.empty() || syn.empty()) throw Error(ErrorCode::config_error, "empty synonym entry");
    auto existing = reverse_.find(syn);
    if (existing != reverse_.end() && existing->second != canon) {
        throw Error(ErrorCode::config_error, "synonym '" + syn + "' maps to both '" + existing->second + "' and '" + canon + "'");
    }
    auto& list = entries_[canon];
    if (std::find(list.begin(), list.end(), syn) == list.end()) list.push_back(syn);
    reverse_[syn] = canon;
    reverse_[canon] = canon;
}

std::optional<std::string> SynonymTable::lookup(std::string_view word) const {
    auto it = reverse_.find(fold_word(word));
    if (it == reverse_.end()) return std::nullopt;
    return it->second;
}

std::string SynonymTable::canonicalize(std::string_view word) const {
    auto hit = lookup(word);
    return hit ? *hit : fold_word(word);
}

bool is_valid_utf8(std::string_view text) {
    std::size_t i = 0;
    while (i < text.size()) {
        auto c = static_cast<unsigned char>(text[i]);
        std::size_t extra = 0;
        std::uint32_t cp = 0;
        if (c < 0x80) {
            ++i;
            continue;
        } else if ((c & 0xe0) == 0xc0) {
            extra = 1;
            cp = c & 0x1f;
        } else if ((c & 0xf0) == 0xe0) {
            extra = 2;
            cp = c & 0x0f;
        } else if ((c & 0xf8) == 0xf0) {
            extra = 3;
            cp = c & 0x07;
        } else {
            return false;
        }
        if (i + extra >= text.size()) return false;
        for (std::size_t k = 1; k <= extra; ++k) {
            auto cc = static_cast<unsigned char>(text[i + k]);
            if ((cc & 0xc0) != 0x80) return false;
            cp = (cp << 6) | (cc & 0x3f);
        }
        // overlong forms, surrogates, out of range
        if ((extra == 1 && cp < 0x80) || (extra == 2 && cp < 0x800) || (extra == 3 && cp < 0x10000) ||
            (cp >= 0xd800 && cp <= 0xdfff) || cp > 0x10ffff) {
            return false;
        }
        i += extra + 1;
    }
    return true;
}

std::string format_number(double value) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, ptr);
}

NormalizedReading normalize(std::string_view raw, const DeviceDescriptor& device, Timestamp timestamp,
                            const SynonymTable& synonyms, std::string_view unit_hint) {
    if (!is_valid_utf8(raw)) throw Error(ErrorCode::decode_error, "payload for '" + device.id + "' is not valid UTF-8");
    NormalizedReading out;
    out.device_id = device.id;
    out.timestamp = timestamp;

    if (device.kind == DeviceKind::sensor) {
        if (auto num = parse_leading_number(trim(raw))) {
            out.numeric = num->first;
            out.value = format_number(num->first);
            std::string_view unit = !num->second.empty() ? num->second : (!unit_hint.empty() ? unit_hint : std::string_view(device.unit));
            out.unit = std::string(unit);
            out.unit_known = out.unit.empty() ||
                             std::find(kKnownUnits.begin(), kKnownUnits.end(), std::string_view(out.unit)) != kKnownUnits.end();
            return out;
        }
    }
    auto hit = synonyms.lookup(raw);
    out.canonical = hit.has_value();
    out.value = hit ? *hit : fold_word(raw);
    return out;
}

std::vector<NormalizedReading> dedupe(std::span<const NormalizedReading> readings) {
    std::vector<NormalizedReading> out;
    for (const auto& r : readings) {
        if (!out.empty() && out.back().same_value(r)) continue;
        out.push_back(r);
    }
    return out;
}

AggregateFn parse_aggregate_fn(std::string_view text) {
    if (text == "last") return AggregateFn::last;
    if (text == "mean") return AggregateFn::mean;
    if (text == "min") return AggregateFn::min;
    if (text == "max") return AggregateFn::max;
    throw Error(ErrorCode::invalid_argument, "unknown aggregate: " + std::string(text));
}

std::optional<AggregateValue> aggregate_window(std::span<const NormalizedReading> readings,
                                               const DeviceDescriptor& device, TimeWindow window, AggregateFn fn) {
    if (fn != AggregateFn::last && device.kind != DeviceKind::sensor) {
        throw Error(ErrorCode::type_error, "numeric aggregate requested for non-numeric device '" + device.id + "'");
    }
    const NormalizedReading* last = nullptr;
    double sum = 0;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    std::size_t count = 0;
    std::string unit;
    for (const auto& r : readings) {
        if (r.device_id != device.id || !window.contains(r.timestamp)) continue;
        if (last == nullptr || r.timestamp >= last->timestamp) last = &r;
        if (fn == AggregateFn::last) continue;
        if (!r.numeric) throw Error(ErrorCode::type_error, "non-numeric reading '" + r.value + "' for '" + device.id + "'");
        sum += *r.numeric;
        lo = std::min(lo, *r.numeric);
        hi = std::max(hi, *r.numeric);
        unit = r.unit;
        ++count;
    }
    if (last == nullptr) return std::nullopt;
    if (fn == AggregateFn::last) return AggregateValue{last->value, last->numeric, last->unit};
    double result = fn == AggregateFn::mean ? sum / static_cast<double>(count) : (fn == AggregateFn::min ? lo : hi);
    return AggregateValue{format_number(result), result, unit};
}

} // namespace edgetalk
