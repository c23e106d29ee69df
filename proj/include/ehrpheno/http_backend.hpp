#pragma once

#include <cstddef>
#include <optional>
#include <string>

#include <json.hpp>

#include "ehrpheno/inference.hpp"

namespace ehrpheno {

struct HttpBackendConfig {
    /// "http://host:port"
    std::string base_url;
    std::string route = "/v1/completions";
    std::string api_key;
    std::string auth_header = "Authorization";
    int max_retries = 3;
    int initial_backoff_ms = 500;
    double backoff_multiplier = 2.0;
    int timeout_seconds = 120;
    std::size_t context_budget_chars = 16000;

    /// Reads EHRPHENO_BACKEND_URL, EHRPHENO_BACKEND_ROUTE and EHRPHENO_API_KEY
    /// over the defaults.
    static HttpBackendConfig from_env();
};

/// Body sent to the completion route:
/// {model, prompt, temperature, top_p, top_k, max_tokens}.
nlohmann::json completion_body(const CompletionRequest& request);

/// Pulls generated text out of the common completion response shapes
/// (choices[0].text, choices[0].message.content, response, content).
std::optional<std::string> completion_text(const nlohmann::json& body);

/// Completion backend over HTTP. Transport failures and 429/5xx replies
/// without a JSON error payload are retried with exponential backoff; a
/// well-formed error payload is surfaced immediately.
class HttpBackend : public CompletionBackend {
public:
    explicit HttpBackend(HttpBackendConfig config);

    CompletionResponse complete(const CompletionRequest& request) override;
    std::string id() const override;

    const HttpBackendConfig& config() const { return config_; }

private:
    HttpBackendConfig config_;
};

}  // namespace ehrpheno
