#pragma once

#include <atomic>
#include <chrono>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "contam/cdd.hpp"
#include "contam/core.hpp"
#include "contam/errors.hpp"

namespace contam {

struct EndpointConfig {
    std::string base_url;  // e.g. "http://127.0.0.1:8080/v1"
    std::optional<std::string> api_key;
    std::string model_name;
    int max_tokens = 100;
    int request_timeout_ms = 30000;
    int max_concurrent_requests = 4;
    int max_retries = 3;
    int retry_backoff_ms = 250;   // doubled after each failed attempt
    bool multi_completion = true; // one request with n completions vs n requests

    void validate() const {
        if (base_url.empty()) throw Error("base_url must be set");
        if (model_name.empty()) throw Error("model_name must be set");
        if (max_tokens < 1) throw Error("max_tokens must be >= 1");
        if (max_concurrent_requests < 1) throw Error("max_concurrent_requests must be >= 1");
        if (max_retries < 0) throw Error("max_retries must be >= 0");
    }
};

struct FailureEntry {
    std::string prompt_id;
    std::string error;
};

namespace detail {

struct SplitUrl {
    std::string origin;       // scheme://host[:port]
    std::string path_prefix;  // e.g. "/v1"
};

inline SplitUrl split_base_url(const std::string& url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw Error("base_url must include a scheme: " + url);
    auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, ""};
    std::string prefix = url.substr(path_start);
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    return {url.substr(0, path_start), prefix};
}

}  // namespace detail

/// One connection to an OpenAI-compatible completions endpoint. Not safe for
/// concurrent calls; batch drivers give each worker its own client.
class CompletionsClient {
  public:
    explicit CompletionsClient(const EndpointConfig& cfg)
        : cfg_(cfg), url_(detail::split_base_url(cfg.base_url)), http_(url_.origin) {
        cfg_.validate();
        const auto timeout = std::chrono::milliseconds(cfg_.request_timeout_ms);
        http_.set_connection_timeout(timeout);
        http_.set_read_timeout(timeout);
        http_.set_write_timeout(timeout);
        if (cfg_.api_key)
            http_.set_default_headers({{"Authorization", "Bearer " + *cfg_.api_key}});
    }

    /// POSTs to /completions, retrying HttpError/Timeout/MalformedResponse
    /// with exponential backoff up to max_retries, then rethrowing the last
    /// error.
    json post_completions(const json& body) {
        const std::string path = url_.path_prefix + "/completions";
        const std::string payload = body.dump();
        int backoff_ms = cfg_.retry_backoff_ms;
        for (int attempt = 0;; ++attempt) {
            try {
                auto res = http_.Post(path, payload, "application/json");
                if (!res) {
                    const auto err = res.error();
                    if (err == httplib::Error::ConnectionTimeout ||
                        err == httplib::Error::Read || err == httplib::Error::Write)
                        throw Timeout("request timed out: " + httplib::to_string(err));
                    throw HttpError(0, "transport failure: " + httplib::to_string(err));
                }
                if (res->status != 200) throw HttpError(res->status, res->body);
                json reply = json::parse(res->body, nullptr, false);
                if (reply.is_discarded() || !reply.is_object() || !reply.contains("choices") ||
                    !reply.at("choices").is_array() || reply.at("choices").empty())
                    throw MalformedResponse("response is not a completions object");
                return reply;
            } catch (const UnsupportedEndpoint&) {
                throw;
            } catch (const Error&) {
                if (attempt >= cfg_.max_retries) throw;
                std::this_thread::sleep_for(std::chrono::milliseconds(backoff_ms));
                backoff_ms *= 2;
            }
        }
    }

    const EndpointConfig& config() const { return cfg_; }

  private:
    EndpointConfig cfg_;
    detail::SplitUrl url_;
    httplib::Client http_;
};

namespace detail {

/// Token ids from a completion choice. Prefers the logprob token stream
/// (integer ids used as-is, token strings mapped through unit_id); otherwise
/// falls back to whitespace units of the text — an approximation, as the
/// model's own tokenization is unavailable.
inline TokenSequence tokens_from_choice(const json& choice, int l_max) {
    if (choice.contains("logprobs") && choice.at("logprobs").is_object()) {
        const json& lj = choice.at("logprobs");
        if (lj.contains("tokens") && lj.at("tokens").is_array() && !lj.at("tokens").empty()) {
            const json& arr = lj.at("tokens");
            TokenSequence seq;
            seq.tokens.reserve(arr.size());
            bool ok = true;
            for (const auto& t : arr) {
                if (t.is_number_integer() && t.get<Token>() >= 0) {
                    seq.tokens.push_back(t.get<Token>());
                } else if (t.is_string()) {
                    seq.tokens.push_back(unit_id(t.get<std::string>()));
                } else {
                    ok = false;
                    break;
                }
            }
            if (ok) return truncate(seq, l_max);
        }
    }
    if (!choice.contains("text") || !choice.at("text").is_string())
        throw MalformedResponse("completion choice has neither token stream nor text");
    TokenSequence units = text_to_units(choice.at("text").get<std::string>());
    if (units.empty()) return units;
    return truncate(units, l_max);
}

inline json base_body(const EndpointConfig& cfg, const std::string& prompt) {
    json body;
    body["model"] = cfg.model_name;
    body["prompt"] = prompt;
    body["max_tokens"] = cfg.max_tokens;
    body["logprobs"] = 0;
    return body;
}

}  // namespace detail

/// One greedy completion (temperature 0) plus n temperature samples for a
/// prompt, all truncated to params.l_max.
inline GenerationRecord collect_generations_with(CompletionsClient& client, const PromptCase& c,
                                                 const CddParams& params) {
    params.validate();
    const EndpointConfig& cfg = client.config();

    json greedy_body = detail::base_body(cfg, c.prompt_text);
    greedy_body["temperature"] = 0.0;
    greedy_body["n"] = 1;
    json greedy_reply = client.post_completions(greedy_body);

    GenerationRecord rec;
    rec.prompt_id = c.id;
    rec.greedy_temperature = 0.0;
    rec.sample_temperature = params.sample_temperature;
    rec.n = params.n;
    rec.greedy = detail::tokens_from_choice(greedy_reply.at("choices").at(0), params.l_max);
    rec.samples.reserve(params.n);

    if (cfg.multi_completion) {
        json body = detail::base_body(cfg, c.prompt_text);
        body["temperature"] = params.sample_temperature;
        body["n"] = params.n;
        json reply = client.post_completions(body);
        const json& choices = reply.at("choices");
        if (choices.size() != static_cast<std::size_t>(params.n))
            throw MalformedResponse("endpoint returned " + std::to_string(choices.size()) +
                                    " completions, expected " + std::to_string(params.n));
        for (const auto& choice : choices)
            rec.samples.push_back(detail::tokens_from_choice(choice, params.l_max));
    } else {
        for (int i = 0; i < params.n; ++i) {
            json body = detail::base_body(cfg, c.prompt_text);
            body["temperature"] = params.sample_temperature;
            body["n"] = 1;
            json reply = client.post_completions(body);
            rec.samples.push_back(
                detail::tokens_from_choice(reply.at("choices").at(0), params.l_max));
        }
    }
    return rec;
}

inline GenerationRecord collect_generations(const EndpointConfig& cfg, const PromptCase& c,
                                            const CddParams& params) {
    CompletionsClient client(cfg);
    return collect_generations_with(client, c, params);
}

/// Echoed prompt log-probabilities. Throws UnsupportedEndpoint when the
/// endpoint cannot echo logprobs; that condition is not retried.
inline PromptLogProbs fetch_prompt_logprobs_with(CompletionsClient& client, const PromptCase& c) {
    const EndpointConfig& cfg = client.config();
    json body = detail::base_body(cfg, c.prompt_text);
    body["max_tokens"] = 0;
    body["temperature"] = 0.0;
    body["echo"] = true;
    json reply = client.post_completions(body);

    const json& choice = reply.at("choices").at(0);
    if (!choice.contains("logprobs") || !choice.at("logprobs").is_object())
        throw UnsupportedEndpoint("endpoint does not return echoed prompt logprobs");
    const json& lj = choice.at("logprobs");
    if (!lj.contains("tokens") || !lj.at("tokens").is_array() || !lj.contains("token_logprobs") ||
        !lj.at("token_logprobs").is_array())
        throw UnsupportedEndpoint("endpoint does not return echoed prompt logprobs");

    const json& toks = lj.at("tokens");
    const json& lps = lj.at("token_logprobs");
    if (toks.size() != lps.size())
        throw MalformedResponse("tokens and token_logprobs lengths differ");

    PromptLogProbs out;
    out.prompt_id = c.id;
    out.tokens.tokens.reserve(toks.size());
    for (const auto& t : toks) {
        if (t.is_number_integer() && t.get<Token>() >= 0)
            out.tokens.tokens.push_back(t.get<Token>());
        else if (t.is_string())
            out.tokens.tokens.push_back(unit_id(t.get<std::string>()));
        else
            throw MalformedResponse("token entries must be ids or strings");
    }
    out.logprobs.reserve(lps.size());
    for (const auto& v : lps) {
        if (v.is_null()) {
            out.logprobs.push_back(std::nullopt);
        } else if (v.is_number()) {
            double d = v.get<double>();
            if (d > 1e-6) throw MalformedResponse("positive log-probability in response");
            out.logprobs.push_back(std::min(d, 0.0));
        } else {
            throw MalformedResponse("token_logprobs entries must be numbers or null");
        }
    }
    return out;
}

inline PromptLogProbs fetch_prompt_logprobs(const EndpointConfig& cfg, const PromptCase& c) {
    CompletionsClient client(cfg);
    return fetch_prompt_logprobs_with(client, c);
}

// ---------------------------------------------------------------------------
// Batch collection: bounded concurrency, per-prompt failures never abort the
// batch, output follows input order.

template <typename Record>
struct Batch {
    std::vector<Record> records;
    std::vector<FailureEntry> failures;
};

using GenerationBatch = Batch<GenerationRecord>;
using LogProbBatch = Batch<PromptLogProbs>;

namespace detail {

template <typename Record, typename PerCase>
Batch<Record> run_batch(const EndpointConfig& cfg, const std::vector<PromptCase>& cases,
                        PerCase&& per_case) {
    cfg.validate();
    std::vector<std::optional<Record>> slots(cases.size());
    std::vector<std::optional<FailureEntry>> failures(cases.size());

    const std::size_t workers =
        std::min<std::size_t>(cfg.max_concurrent_requests, std::max<std::size_t>(cases.size(), 1));
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            CompletionsClient client(cfg);
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= cases.size()) return;
                try {
                    slots[i] = per_case(client, cases[i]);
                } catch (const std::exception& e) {
                    failures[i] = FailureEntry{cases[i].id, e.what()};
                }
            }
        });
    }
    for (auto& t : pool) t.join();

    Batch<Record> out;
    for (std::size_t i = 0; i < cases.size(); ++i) {
        if (slots[i]) out.records.push_back(std::move(*slots[i]));
        if (failures[i]) out.failures.push_back(std::move(*failures[i]));
    }
    return out;
}

}  // namespace detail

inline GenerationBatch collect_generations_batch(const EndpointConfig& cfg,
                                                 const std::vector<PromptCase>& cases,
                                                 const CddParams& params) {
    return detail::run_batch<GenerationRecord>(
        cfg, cases, [&](CompletionsClient& client, const PromptCase& c) {
            return collect_generations_with(client, c, params);
        });
}

inline LogProbBatch fetch_logprobs_batch(const EndpointConfig& cfg,
                                         const std::vector<PromptCase>& cases) {
    return detail::run_batch<PromptLogProbs>(
        cfg, cases, [&](CompletionsClient& client, const PromptCase& c) {
            return fetch_prompt_logprobs_with(client, c);
        });
}

inline void save_failures(const std::string& path, const std::vector<FailureEntry>& failures) {
    auto out = detail::open_out(path);
    for (const auto& f : failures) {
        json j;
        j["prompt_id"] = f.prompt_id;
        j["error"] = f.error;
        out << j.dump() << '\n';
    }
}

}  // namespace contam
