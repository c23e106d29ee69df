#include "ehrpheno/inference.hpp"

#include <chrono>
#include <cstdio>
#include <exception>
#include <thread>

#include "ehrpheno/errors.hpp"
#include "ehrpheno/text.hpp"

using nlohmann::json;

namespace ehrpheno {

void GenerationParams::validate() const {
    if (!(temperature >= 0.0 && temperature <= 1.0)) {
        throw ValidationError("temperature must lie in [0, 1]");
    }
    if (!(top_p > 0.0 && top_p <= 1.0)) throw ValidationError("top_p must lie in (0, 1]");
    if (top_k <= 1) throw ValidationError("top_k must be greater than 1");
    if (max_new_tokens <= 0) throw ValidationError("max_new_tokens must be positive");
    if (model_id.empty()) throw ValidationError("model_id is empty");
}

std::string GenerationParams::canonical() const {
    char buf[160];
    std::snprintf(buf, sizeof buf, "temperature=%.17g;top_p=%.17g;top_k=%d;max_new_tokens=%d",
                  temperature, top_p, top_k, max_new_tokens);
    return "model=" + model_id + ";" + buf;
}

json GenerationParams::to_json() const {
    return {{"temperature", temperature},
            {"top_p", top_p},
            {"top_k", top_k},
            {"max_new_tokens", max_new_tokens},
            {"model_id", model_id}};
}

GenerationParams GenerationParams::from_json(const json& j) {
    GenerationParams p;
    try {
        p.temperature = j.value("temperature", p.temperature);
        p.top_p = j.value("top_p", p.top_p);
        p.top_k = j.value("top_k", p.top_k);
        p.max_new_tokens = j.value("max_new_tokens", p.max_new_tokens);
        p.model_id = j.value("model_id", p.model_id);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("bad generation params: ") + e.what());
    }
    p.validate();
    return p;
}

CompletionResponse complete(CompletionBackend& backend, const CompletionRequest& request) {
    const auto start = std::chrono::steady_clock::now();
    auto response = backend.complete(request);
    response.latency_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    if (response.backend_id.empty()) response.backend_id = backend.id();
    return response;
}

std::vector<TextChunk> chunk_text(std::string_view text, std::size_t max_chars) {
    std::vector<TextChunk> chunks;
    if (text.size() <= max_chars) {
        chunks.push_back({0, std::string(text), false});
        return chunks;
    }
    TextChunk current;
    bool open = false;
    for (const auto& piece : text::sentence_pieces(text)) {
        if (open && current.text.size() + piece.length <= max_chars) {
            current.text.append(text.substr(piece.offset, piece.length));
            continue;
        }
        if (open) chunks.push_back(std::move(current));
        current = TextChunk{piece.offset, std::string(text.substr(piece.offset, piece.length)),
                            piece.length > max_chars};
        open = true;
        if (current.oversized) {
            chunks.push_back(std::move(current));
            open = false;
        }
    }
    if (open) chunks.push_back(std::move(current));
    return chunks;
}

ScriptedBackend::ScriptedBackend(std::map<std::string, std::string> responses, std::string fallback)
    : responses_(std::move(responses)), fallback_(std::move(fallback)) {}

CompletionResponse ScriptedBackend::complete(const CompletionRequest& request) {
    ++calls_;
    for (const auto& f : failures_) {
        if (f == request.prompt) throw BackendError("scripted failure", 500);
    }
    auto it = responses_.find(request.prompt);
    return {it == responses_.end() ? fallback_ : it->second, 0.0, id()};
}

void parallel_for(std::size_t n, std::size_t parallelism,
                  const std::function<void(std::size_t)>& fn) {
    if (parallelism <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex error_mutex;
    {
        std::vector<std::jthread> workers;
        const auto count = std::min(parallelism, n);
        for (std::size_t w = 0; w < count; ++w) {
            workers.emplace_back([&] {
                for (std::size_t i = next++; i < n && !failed; i = next++) {
                    try {
                        fn(i);
                    } catch (...) {
                        std::lock_guard lock(error_mutex);
                        if (!error) error = std::current_exception();
                        failed = true;
                    }
                }
            });
        }
    }
    if (error) std::rethrow_exception(error);
}

}  // namespace ehrpheno
