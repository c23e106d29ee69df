#include "ehrpheno/http_backend.hpp"

#include <chrono>
#include <cstdlib>
#include <thread>

#include <httplib.h>

#include "ehrpheno/errors.hpp"

using nlohmann::json;

namespace ehrpheno {

namespace {

std::string env_or(const char* name, std::string fallback) {
    const char* v = std::getenv(name);
    return v && *v ? std::string(v) : std::move(fallback);
}

bool is_error_payload(const std::string& body) {
    auto j = json::parse(body, nullptr, false);
    return !j.is_discarded() && j.is_object() && j.contains("error");
}

std::string error_message(const std::string& body) {
    auto j = json::parse(body, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("error")) return body;
    const auto& e = j["error"];
    if (e.is_string()) return e.get<std::string>();
    if (e.is_object() && e.contains("message") && e["message"].is_string()) {
        return e["message"].get<std::string>();
    }
    return e.dump();
}

}  // namespace

HttpBackendConfig HttpBackendConfig::from_env() {
    HttpBackendConfig c;
    c.base_url = env_or("EHRPHENO_BACKEND_URL", c.base_url);
    c.route = env_or("EHRPHENO_BACKEND_ROUTE", c.route);
    c.api_key = env_or("EHRPHENO_API_KEY", c.api_key);
    return c;
}

json completion_body(const CompletionRequest& request) {
    const auto& p = request.params;
    return {{"model", p.model_id},
            {"prompt", request.prompt},
            {"temperature", p.temperature},
            {"top_p", p.top_p},
            {"top_k", p.top_k},
            {"max_tokens", p.max_new_tokens}};
}

std::optional<std::string> completion_text(const json& body) {
    if (!body.is_object()) return std::nullopt;
    if (auto it = body.find("choices"); it != body.end() && it->is_array() && !it->empty()) {
        const auto& first = (*it)[0];
        if (first.contains("text") && first["text"].is_string()) return first["text"].get<std::string>();
        if (first.contains("message") && first["message"].is_object()) {
            const auto& msg = first["message"];
            if (msg.contains("content") && msg["content"].is_string()) {
                return msg["content"].get<std::string>();
            }
        }
    }
    for (const char* key : {"response", "content", "text"}) {
        if (auto it = body.find(key); it != body.end() && it->is_string()) return it->get<std::string>();
    }
    return std::nullopt;
}

HttpBackend::HttpBackend(HttpBackendConfig config) : config_(std::move(config)) {
    if (config_.base_url.empty()) throw ValidationError("backend URL is not configured");
    if (config_.max_retries < 0) throw ValidationError("max_retries must be >= 0");
}

std::string HttpBackend::id() const { return "http:" + config_.base_url + config_.route; }

CompletionResponse HttpBackend::complete(const CompletionRequest& request) {
    if (request.prompt.size() > config_.context_budget_chars) {
        throw ContextOverflowError("prompt of " + std::to_string(request.prompt.size()) +
                                   " characters exceeds the context budget of " +
                                   std::to_string(config_.context_budget_chars));
    }
    httplib::Client client(config_.base_url);
    client.set_connection_timeout(std::chrono::seconds(config_.timeout_seconds));
    client.set_read_timeout(std::chrono::seconds(config_.timeout_seconds));
    client.set_write_timeout(std::chrono::seconds(config_.timeout_seconds));

    httplib::Headers headers;
    if (!config_.api_key.empty()) {
        headers.emplace(config_.auth_header, config_.auth_header == "Authorization"
                                                 ? "Bearer " + config_.api_key
                                                 : config_.api_key);
    }
    const auto body = completion_body(request).dump();

    std::string last_failure;
    double delay_ms = config_.initial_backoff_ms;
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(delay_ms));
            delay_ms *= config_.backoff_multiplier;
        }
        const auto start = std::chrono::steady_clock::now();
        auto res = client.Post(config_.route, headers, body, "application/json");
        if (!res) {
            last_failure = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        const int status = res->status;
        if (status >= 200 && status < 300) {
            auto parsed = json::parse(res->body, nullptr, false);
            if (parsed.is_discarded()) {
                return {res->body, 0.0, id()};
            }
            if (auto text = completion_text(parsed)) {
                const double ms = std::chrono::duration<double, std::milli>(
                                      std::chrono::steady_clock::now() - start)
                                      .count();
                return {std::move(*text), ms, id()};
            }
            if (parsed.is_object() && parsed.contains("error")) {
                throw BackendError("backend error: " + error_message(res->body), status);
            }
            throw BackendError("unrecognised completion response: " + res->body.substr(0, 200), status);
        }
        if (is_error_payload(res->body)) {
            throw BackendError("backend error (HTTP " + std::to_string(status) +
                                   "): " + error_message(res->body),
                               status);
        }
        if (status == 429 || status >= 500) {
            last_failure = "HTTP " + std::to_string(status);
            continue;
        }
        throw BackendError("backend rejected request (HTTP " + std::to_string(status) + ")", status);
    }
    throw BackendError("backend unreachable after " + std::to_string(config_.max_retries + 1) +
                       " attempts: " + last_failure);
}

}  // namespace ehrpheno
