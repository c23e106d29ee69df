#pragma once

#include <atomic>
#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace ehrpheno {

/// Sampling settings forwarded to the backend. Defaults are the tuned values
/// used for production runs.
struct GenerationParams {
    double temperature = 0.5;
    double top_p = 0.9;
    int top_k = 50;
    int max_new_tokens = 256;
    std::string model_id = "mistral-7b-openorca";

    /// Same settings with temperature forced to 0, for reproducible runs on
    /// backends that honour it.
    GenerationParams deterministic() const {
        auto p = *this;
        p.temperature = 0.0;
        return p;
    }

    /// Throws ValidationError when a field is out of range.
    void validate() const;

    /// Stable byte encoding used in cache keys.
    std::string canonical() const;

    nlohmann::json to_json() const;
    static GenerationParams from_json(const nlohmann::json& j);

    bool operator==(const GenerationParams&) const = default;
};

struct CompletionRequest {
    std::string prompt;
    GenerationParams params;
};

struct CompletionResponse {
    /// Raw backend output, never post-processed.
    std::string text;
    double latency_ms = 0.0;
    std::string backend_id;
};

/// A text-completion service. Implementations must tolerate concurrent calls.
class CompletionBackend {
public:
    virtual ~CompletionBackend() = default;

    virtual CompletionResponse complete(const CompletionRequest& request) = 0;
    virtual std::string id() const = 0;
};

/// Sends one request, timing it. Errors propagate as BackendError.
CompletionResponse complete(CompletionBackend& backend, const CompletionRequest& request);

struct TextChunk {
    std::size_t offset = 0;
    std::string text;
    /// A single sentence longer than the budget.
    bool oversized = false;
};

inline constexpr std::size_t kDefaultChunkChars = 12000;

/// Greedy packing of whole sentences into chunks of at most `max_chars`
/// characters. Concatenating the chunk texts reproduces `text`.
std::vector<TextChunk> chunk_text(std::string_view text, std::size_t max_chars = kDefaultChunkChars);

/// Replays canned responses keyed by exact prompt. Unknown prompts get
/// `fallback`; prompts listed in `failures` raise BackendError.
class ScriptedBackend : public CompletionBackend {
public:
    explicit ScriptedBackend(std::map<std::string, std::string> responses,
                             std::string fallback = "I cannot answer that.");

    void fail_on(const std::string& prompt) { failures_.push_back(prompt); }

    CompletionResponse complete(const CompletionRequest& request) override;
    std::string id() const override { return "scripted"; }

    std::size_t calls() const { return calls_.load(); }

private:
    std::map<std::string, std::string> responses_;
    std::string fallback_;
    std::vector<std::string> failures_;
    std::atomic<std::size_t> calls_{0};
};

/// Runs fn(0..n-1) on up to `parallelism` threads. The first exception thrown
/// by any task is rethrown after all workers stop.
void parallel_for(std::size_t n, std::size_t parallelism,
                  const std::function<void(std::size_t)>& fn);

}  // namespace ehrpheno
