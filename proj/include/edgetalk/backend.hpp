#pragma once

#include "edgetalk/prompt.hpp"

#include <array>
#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace edgetalk {

struct InferenceResult {
    std::string raw_text;
    std::chrono::nanoseconds latency{0};
    std::string backend_id;
};

// Generate contract shared by every inference backend. Errors are thrown as
// Error with one of the backend_* codes or unscripted_input; backends never
// retry on their own.
class Backend {
public:
    virtual ~Backend() = default;
    virtual InferenceResult generate(const StructuredPrompt& prompt) = 0;
    virtual std::string id() const = 0;
};

struct BackendConfig {
    enum class Kind { http, scripted };

    Kind kind = Kind::http;
    std::string endpoint = "http://localhost:11434/api/generate";
    std::string model_name = "llama3";
    std::chrono::milliseconds timeout{std::chrono::minutes{5}};
    std::filesystem::path script_path;

    void validate() const;
};

// Request body for the local model server: {"model":...,"prompt":...,"stream":false}
std::string generate_request_body(std::string_view model, std::string_view prompt);

class HttpBackend final : public Backend {
public:
    HttpBackend(std::string endpoint, std::string model_name, std::chrono::milliseconds timeout);

    InferenceResult generate(const StructuredPrompt& prompt) override;
    std::string id() const override { return "http:" + model_name_; }

private:
    std::string base_url_;
    std::string path_;
    std::string model_name_;
    std::chrono::milliseconds timeout_;
};

struct ScriptEntry {
    std::string match;
    std::string response;
    std::chrono::milliseconds delay{0};
};

// Answers only the commands listed in its script, keyed on the user command
// (first prompt line), after sleeping the entry's delay.
class ScriptedBackend final : public Backend {
public:
    ScriptedBackend(std::vector<ScriptEntry> entries, std::string label = "scripted");

    // JSON lines: {"match": ..., "response": ..., "delay_seconds": ...}
    static ScriptedBackend load_script(const std::filesystem::path& path);
    static ScriptedBackend parse_script(std::string_view text, std::string label = "scripted");

    InferenceResult generate(const StructuredPrompt& prompt) override;
    std::string id() const override { return label_; }
    const std::vector<ScriptEntry>& entries() const { return entries_; }

private:
    std::vector<ScriptEntry> entries_;
    std::map<std::string, std::size_t, std::less<>> index_;
    std::string label_;
};

std::unique_ptr<Backend> make_backend(const BackendConfig& config);

// Reference sizes for small open models on edge hardware. Documentation only,
// nothing enforces them.
struct ModelPreset {
    std::string_view name;
    std::string_view params;
    std::string_view q4_size;
    double min_ram_gb;
};

inline constexpr std::array<ModelPreset, 8> kModelPresets{{
    {"TinyLlama-1.1B", "1.1B", "0.55-0.7 GB", 1.5},
    {"StableLM-Zephyr-3B", "3B", "1.8-2.2 GB", 4},
    {"Phi-2", "2.7B", "1.5-1.8 GB", 3},
    {"Gemma-2B", "2B", "1.3-1.6 GB", 3},
    {"LLaMA-2-7B", "7B", "3.8-4.5 GB", 6},
    {"Mistral-7B", "7B", "4.0-4.5 GB", 6},
    {"GPT-J-6B", "6B", "3.0-3.5 GB", 5},
    {"DistilGPT-2", "82M", "0.3-0.5 GB", 1},
}};

} // namespace edgetalk
