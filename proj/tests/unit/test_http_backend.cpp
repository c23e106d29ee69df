#include <doctest.h>

#include <atomic>
#include <thread>

#include <httplib.h>

#include "ehrpheno/errors.hpp"
#include "ehrpheno/http_backend.hpp"

using namespace ehrpheno;
using nlohmann::json;

namespace {

/// httplib server on an ephemeral port, stopped on destruction.
class LocalServer {
public:
    explicit LocalServer(std::function<void(const httplib::Request&, httplib::Response&)> handler) {
        server_.Post("/v1/completions", std::move(handler));
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~LocalServer() {
        server_.stop();
        thread_.join();
    }
    std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }

private:
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
};

HttpBackendConfig config_for(const std::string& url) {
    HttpBackendConfig c;
    c.base_url = url;
    c.initial_backoff_ms = 1;
    c.max_retries = 3;
    c.timeout_seconds = 5;
    return c;
}

}  // namespace

TEST_SUITE("http_backend") {
    TEST_CASE("request body carries model and sampling settings") {
        GenerationParams p;
        const auto body = completion_body({"hello", p});
        CHECK(body["model"] == "mistral-7b-openorca");
        CHECK(body["prompt"] == "hello");
        CHECK(body["temperature"] == 0.5);
        CHECK(body["top_p"] == 0.9);
        CHECK(body["top_k"] == 50);
        CHECK(body["max_tokens"] == p.max_new_tokens);
    }

    TEST_CASE("response shapes") {
        CHECK(completion_text(json::parse(R"({"choices":[{"text":"a"}]})")) == std::optional<std::string>("a"));
        CHECK(completion_text(json::parse(R"({"choices":[{"message":{"content":"b"}}]})")) ==
              std::optional<std::string>("b"));
        CHECK(completion_text(json::parse(R"({"response":"c"})")) == std::optional<std::string>("c"));
        CHECK(completion_text(json::parse(R"({"content":"d"})")) == std::optional<std::string>("d"));
        CHECK_FALSE(completion_text(json::parse(R"({"other":1})")));
    }

    TEST_CASE("successful completion is returned raw") {
        std::string seen_auth;
        json seen_body;
        LocalServer server([&](const httplib::Request& req, httplib::Response& res) {
            seen_auth = req.get_header_value("Authorization");
            seen_body = json::parse(req.body);
            res.set_content(R"({"choices":[{"text":"  Yes, it is.\n"}]})", "application/json");
        });
        auto cfg = config_for(server.url());
        cfg.api_key = "secret";
        HttpBackend b(cfg);
        const auto r = b.complete({"prompt text", {}});
        CHECK(r.text == "  Yes, it is.\n");
        CHECK(seen_auth == "Bearer secret");
        CHECK(seen_body["prompt"] == "prompt text");
    }

    TEST_CASE("transient 503 is retried") {
        std::atomic<int> calls{0};
        LocalServer server([&](const httplib::Request&, httplib::Response& res) {
            if (++calls < 3) {
                res.status = 503;
                res.set_content("busy", "text/plain");
                return;
            }
            res.set_content(R"({"response":"ok"})", "application/json");
        });
        HttpBackend b(config_for(server.url()));
        CHECK(b.complete({"p", {}}).text == "ok");
        CHECK(calls == 3);
    }

    TEST_CASE("retries are bounded") {
        std::atomic<int> calls{0};
        LocalServer server([&](const httplib::Request&, httplib::Response& res) {
            ++calls;
            res.status = 429;
        });
        HttpBackend b(config_for(server.url()));
        CHECK_THROWS_AS(b.complete({"p", {}}), BackendError);
        CHECK(calls == 4);
    }

    TEST_CASE("error payloads fail immediately with their status") {
        std::atomic<int> calls{0};
        LocalServer server([&](const httplib::Request&, httplib::Response& res) {
            ++calls;
            res.status = 500;
            res.set_content(R"({"error":{"message":"model not loaded"}})", "application/json");
        });
        HttpBackend b(config_for(server.url()));
        try {
            b.complete({"p", {}});
            FAIL("expected BackendError");
        } catch (const BackendError& e) {
            CHECK(e.status() == 500);
            CHECK(std::string(e.what()).find("model not loaded") != std::string::npos);
        }
        CHECK(calls == 1);
    }

    TEST_CASE("client errors are not retried") {
        std::atomic<int> calls{0};
        LocalServer server([&](const httplib::Request&, httplib::Response& res) {
            ++calls;
            res.status = 400;
        });
        HttpBackend b(config_for(server.url()));
        CHECK_THROWS_AS(b.complete({"p", {}}), BackendError);
        CHECK(calls == 1);
    }

    TEST_CASE("unreachable backend fails after retries") {
        int port = 0;
        {
            httplib::Server probe;
            port = probe.bind_to_any_port("127.0.0.1");
        }
        auto cfg = config_for("http://127.0.0.1:" + std::to_string(port));
        cfg.max_retries = 1;
        cfg.timeout_seconds = 1;
        HttpBackend b(cfg);
        CHECK_THROWS_AS(b.complete({"p", {}}), BackendError);
    }

    TEST_CASE("oversized prompts are refused before sending") {
        auto cfg = config_for("http://127.0.0.1:9");
        cfg.context_budget_chars = 10;
        HttpBackend b(cfg);
        CHECK_THROWS_AS(b.complete({std::string(11, 'x'), {}}), ContextOverflowError);
    }
}
