#include "ehrpheno/cache.hpp"

#include <chrono>

#include <json.hpp>

#include "ehrpheno/io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace ehrpheno {

std::string cache_key(const CompletionRequest& request) {
    std::string material = request.params.model_id;
    material += '\0';
    material += request.params.canonical();
    material += '\0';
    material += request.prompt;
    return io::sha256_hex(material);
}

ResponseCache::ResponseCache(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

fs::path ResponseCache::path_for(const std::string& key) const {
    return dir_ / key.substr(0, 2) / (key + ".json");
}

std::optional<std::string> ResponseCache::lookup(const std::string& key) const {
    const auto path = path_for(key);
    std::error_code ec;
    if (!fs::exists(path, ec)) return std::nullopt;
    try {
        auto entry = json::parse(io::read_file(path));
        if (entry.value("key", "") != key) return std::nullopt;
        return entry.at("response").get<std::string>();
    } catch (const std::exception&) {
        // A torn or foreign file is treated as a miss and overwritten later.
        return std::nullopt;
    }
}

void ResponseCache::insert(const std::string& key, const CompletionRequest& request,
                           const std::string& response) const {
    const auto now = std::chrono::duration_cast<std::chrono::seconds>(
                         std::chrono::system_clock::now().time_since_epoch())
                         .count();
    json entry = {{"key", key},
                  {"model_id", request.params.model_id},
                  {"params", request.params.canonical()},
                  {"created_at", now},
                  {"response", response}};
    io::write_file_atomic(path_for(key), entry.dump());
}

CachingBackend::CachingBackend(std::shared_ptr<CompletionBackend> inner, fs::path dir)
    : inner_(std::move(inner)), cache_(std::move(dir)) {}

CompletionResponse CachingBackend::complete(const CompletionRequest& request) {
    const auto key = cache_key(request);
    if (auto hit = cache_.lookup(key)) {
        ++hits_;
        return {std::move(*hit), 0.0, inner_->id()};
    }
    ++misses_;
    auto response = inner_->complete(request);
    cache_.insert(key, request, response.text);
    return response;
}

}  // namespace ehrpheno
