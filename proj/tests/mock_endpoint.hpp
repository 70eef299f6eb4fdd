#pragma once

// In-process OpenAI-compatible mock endpoint for sampler tests. Captures
// request bodies and tracks how many handlers run concurrently.

#include <atomic>
#include <chrono>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

namespace mock {

using nlohmann::json;

class Endpoint {
  public:
    using Handler = std::function<void(const json& body, httplib::Response& res)>;

    explicit Endpoint(Handler handler, int delay_ms = 0)
        : handler_(std::move(handler)), delay_ms_(delay_ms) {
        server_.Post("/v1/completions",
                     [this](const httplib::Request& req, httplib::Response& res) {
                         const int cur = ++in_flight_;
                         int prev = peak_.load();
                         while (cur > prev && !peak_.compare_exchange_weak(prev, cur)) {
                         }
                         ++requests_;
                         json body = json::parse(req.body, nullptr, false);
                         {
                             std::lock_guard<std::mutex> lock(mu_);
                             bodies_.push_back(body);
                         }
                         if (delay_ms_ > 0)
                             std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms_));
                         handler_(body, res);
                         --in_flight_;
                     });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }

    ~Endpoint() {
        server_.stop();
        if (thread_.joinable()) thread_.join();
    }

    std::string base_url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }
    int peak_in_flight() const { return peak_.load(); }
    int request_count() const { return requests_.load(); }

    std::vector<json> bodies() const {
        std::lock_guard<std::mutex> lock(mu_);
        return bodies_;
    }

  private:
    Handler handler_;
    int delay_ms_ = 0;
    httplib::Server server_;
    std::thread thread_;
    int port_ = 0;
    std::atomic<int> in_flight_{0};
    std::atomic<int> peak_{0};
    std::atomic<int> requests_{0};
    mutable std::mutex mu_;
    std::vector<json> bodies_;
};

inline json choice_with_tokens(const json& tokens, const json& token_logprobs = json()) {
    json logprobs;
    logprobs["tokens"] = tokens;
    if (!token_logprobs.is_null()) logprobs["token_logprobs"] = token_logprobs;
    return json{{"text", "ignored"}, {"logprobs", logprobs}};
}

inline json choice_with_text(const std::string& text) { return json{{"text", text}}; }

inline void reply(httplib::Response& res, json choices) {
    res.set_content(json{{"choices", std::move(choices)}}.dump(), "application/json");
}

}  // namespace mock
