#pragma once

#include <atomic>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "ehrpheno/inference.hpp"

namespace ehrpheno {

/// Content hash of (model_id, params, prompt).
std::string cache_key(const CompletionRequest& request);

/// Content-addressed directory of backend responses. One file per key under
/// a two-character fan-out directory; no eviction.
class ResponseCache {
public:
    explicit ResponseCache(std::filesystem::path dir);

    std::optional<std::string> lookup(const std::string& key) const;
    void insert(const std::string& key, const CompletionRequest& request,
                const std::string& response) const;

    const std::filesystem::path& dir() const { return dir_; }

private:
    std::filesystem::path path_for(const std::string& key) const;

    std::filesystem::path dir_;
};

/// Decorator serving repeated requests from a ResponseCache. Only misses
/// reach the wrapped backend.
class CachingBackend : public CompletionBackend {
public:
    CachingBackend(std::shared_ptr<CompletionBackend> inner, std::filesystem::path dir);

    CompletionResponse complete(const CompletionRequest& request) override;
    std::string id() const override { return inner_->id(); }

    std::size_t hits() const { return hits_.load(); }
    /// Requests forwarded to the wrapped backend.
    std::size_t backend_calls() const { return misses_.load(); }

private:
    std::shared_ptr<CompletionBackend> inner_;
    ResponseCache cache_;
    std::atomic<std::size_t> hits_{0};
    std::atomic<std::size_t> misses_{0};
};

}  // namespace ehrpheno
