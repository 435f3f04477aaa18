#pragma once

#include "edgetalk/registry.hpp"
#include "edgetalk/transport.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <unistd.h>

namespace testutil {

inline std::filesystem::path fixture(const std::string& rel) { return std::filesystem::path(EDGETALK_FIXTURE_DIR) / rel; }
inline std::filesystem::path data(const std::string& rel) { return std::filesystem::path(EDGETALK_DATA_DIR) / rel; }

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline edgetalk::DeviceDescriptor device(const std::string& id, edgetalk::DeviceKind kind,
                                         std::vector<std::string> caps = {"on", "off"}, std::string unit = {}) {
    edgetalk::DeviceDescriptor d;
    d.id = id;
    d.kind = kind;
    d.capabilities = std::move(caps);
    d.unit = std::move(unit);
    return d;
}

// light, tv, fan with on/off: the three-device room used throughout.
inline std::vector<edgetalk::DeviceDescriptor> room() {
    using edgetalk::DeviceKind;
    return {device("light", DeviceKind::light), device("tv", DeviceKind::tv), device("fan", DeviceKind::fan)};
}

inline void fill(edgetalk::Registry& reg, const std::vector<edgetalk::DeviceDescriptor>& devices) {
    for (const auto& d : devices) reg.register_device(d);
}

inline void set_states(edgetalk::Registry& reg, const std::vector<std::pair<std::string, std::string>>& values,
                       edgetalk::Timestamp ts = edgetalk::now_ms()) {
    for (const auto& [id, v] : values) reg.apply_status_update(id, {v, std::nullopt, {}}, ts);
}

class RecordingPublisher : public edgetalk::CommandPublisher {
public:
    void publish_command(const std::string& device_id, const std::string& action) override {
        std::lock_guard lock(mutex_);
        if (fail_after_ && sent_.size() >= *fail_after_) {
            throw edgetalk::Error(edgetalk::ErrorCode::backpressure, "offline queue full");
        }
        sent_.emplace_back(device_id, action);
    }
    std::vector<std::pair<std::string, std::string>> sent() const {
        std::lock_guard lock(mutex_);
        return sent_;
    }
    void fail_after(std::size_t n) { fail_after_ = n; }

private:
    mutable std::mutex mutex_;
    std::vector<std::pair<std::string, std::string>> sent_;
    std::optional<std::size_t> fail_after_;
};

template <typename Pred>
bool wait_until(Pred pred, std::chrono::milliseconds timeout = std::chrono::seconds(5)) {
    auto deadline = std::chrono::steady_clock::now() + timeout;
    while (std::chrono::steady_clock::now() < deadline) {
        if (pred()) return true;
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    return pred();
}

class TempDir {
public:
    TempDir() {
        auto base = std::filesystem::temp_directory_path();
        for (int i = 0;; ++i) {
            path_ = base / ("edgetalk-test-" + std::to_string(::getpid()) + "-" + std::to_string(i));
            if (std::filesystem::create_directory(path_)) break;
        }
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

} // namespace testutil
