#include <doctest.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "contam/sampler.hpp"
#include "mock_endpoint.hpp"

using namespace contam;
namespace fs = std::filesystem;

namespace {

PromptCase prompt_case(std::string id, std::string text = "what is two plus two") {
    PromptCase c;
    c.id = std::move(id);
    c.label = Label::Clean;
    c.prompt_text = std::move(text);
    c.prompt_tokens = text_to_units(c.prompt_text);
    return c;
}

EndpointConfig test_config(const mock::Endpoint& ep) {
    EndpointConfig cfg;
    cfg.base_url = ep.base_url();
    cfg.model_name = "test-model";
    cfg.max_retries = 3;
    cfg.retry_backoff_ms = 1;
    cfg.request_timeout_ms = 5000;
    return cfg;
}

// Serves integer-token completions: one choice per requested n.
void fixed_completion_handler(const mock::json& body, httplib::Response& res) {
    const int n = body.value("n", 1);
    mock::json choices = mock::json::array();
    for (int i = 0; i < n; ++i)
        choices.push_back(mock::choice_with_tokens({10, 11, 12, 13}));
    mock::reply(res, std::move(choices));
}

}  // namespace

TEST_CASE("collect_generations maps a fixed completion into a record") {
    mock::Endpoint ep(fixed_completion_handler);
    CddParams params;
    params.n = 5;
    auto rec = collect_generations(test_config(ep), prompt_case("p1"), params);

    CHECK(rec.prompt_id == "p1");
    CHECK(rec.greedy.tokens == std::vector<Token>{10, 11, 12, 13});
    REQUIRE(rec.samples.size() == 5);
    for (const auto& s : rec.samples) CHECK(s == rec.greedy);
    CHECK(rec.n == 5);
    CHECK(rec.greedy_temperature == 0.0);
    CHECK(rec.sample_temperature == 0.8);

    // wire contract: first request greedy at temperature 0, then one
    // n-completion request at the sampling temperature
    auto bodies = ep.bodies();
    REQUIRE(bodies.size() == 2);
    CHECK(bodies[0].at("temperature").get<double>() == 0.0);
    CHECK(bodies[0].at("n").get<int>() == 1);
    CHECK(bodies[1].at("temperature").get<double>() == 0.8);
    CHECK(bodies[1].at("n").get<int>() == 5);
    CHECK(bodies[0].at("model") == "test-model");
}

TEST_CASE("single-completion mode issues n separate sample requests") {
    mock::Endpoint ep(fixed_completion_handler);
    EndpointConfig cfg = test_config(ep);
    cfg.multi_completion = false;
    CddParams params;
    params.n = 4;
    auto rec = collect_generations(cfg, prompt_case("p1"), params);
    CHECK(rec.samples.size() == 4);
    CHECK(ep.request_count() == 5);  // 1 greedy + 4 samples
    for (const auto& body : ep.bodies()) CHECK(body.at("n").get<int>() == 1);
}

TEST_CASE("token id extraction cascade") {
    CddParams params;
    params.n = 1;

    SUBCASE("string tokens map through the unit hash") {
        mock::Endpoint ep([](const mock::json& body, httplib::Response& res) {
            const int n = body.value("n", 1);
            mock::json choices = mock::json::array();
            for (int i = 0; i < n; ++i)
                choices.push_back(mock::choice_with_tokens({"the", "answer"}));
            mock::reply(res, std::move(choices));
        });
        auto rec = collect_generations(test_config(ep), prompt_case("p1"), params);
        CHECK(rec.greedy.tokens == std::vector<Token>{unit_id("the"), unit_id("answer")});
    }

    SUBCASE("text-only responses fall back to whitespace units") {
        mock::Endpoint ep([](const mock::json& body, httplib::Response& res) {
            const int n = body.value("n", 1);
            mock::json choices = mock::json::array();
            for (int i = 0; i < n; ++i)
                choices.push_back(mock::choice_with_text("four is the answer"));
            mock::reply(res, std::move(choices));
        });
        auto rec = collect_generations(test_config(ep), prompt_case("p1"), params);
        CHECK(rec.greedy == text_to_units("four is the answer"));
    }

    SUBCASE("sequences are truncated to l_max") {
        mock::Endpoint ep([](const mock::json& body, httplib::Response& res) {
            const int n = body.value("n", 1);
            mock::json tokens = mock::json::array();
            for (int t = 0; t < 300; ++t) tokens.push_back(t);
            mock::json choices = mock::json::array();
            for (int i = 0; i < n; ++i) choices.push_back(mock::choice_with_tokens(tokens));
            mock::reply(res, std::move(choices));
        });
        CddParams p;
        p.n = 1;
        p.l_max = 100;
        auto rec = collect_generations(test_config(ep), prompt_case("p1"), p);
        CHECK(rec.greedy.size() == 100);
    }
}

TEST_CASE("transient failures are retried with backoff") {
    std::atomic<int> calls{0};
    mock::Endpoint ep([&](const mock::json& body, httplib::Response& res) {
        if (calls.fetch_add(1) < 2) {
            res.status = 500;
            res.set_content("boom", "text/plain");
            return;
        }
        fixed_completion_handler(body, res);
    });
    CddParams params;
    params.n = 1;
    auto rec = collect_generations(test_config(ep), prompt_case("p1"), params);
    CHECK(rec.greedy.size() == 4);
    CHECK(calls.load() >= 3);
}

TEST_CASE("a permanently failing prompt is reported, not fatal") {
    mock::Endpoint ep([](const mock::json& body, httplib::Response& res) {
        if (body.at("prompt").get<std::string>().find("poison") != std::string::npos) {
            res.status = 500;
            res.set_content("kaput", "text/plain");
            return;
        }
        fixed_completion_handler(body, res);
    });
    EndpointConfig cfg = test_config(ep);
    cfg.max_retries = 1;

    std::vector<PromptCase> cases;
    for (int i = 0; i < 10; ++i)
        cases.push_back(prompt_case("p" + std::to_string(i),
                                    i == 4 ? "poison pill" : "fine prompt " + std::to_string(i)));
    CddParams params;
    params.n = 2;
    auto batch = collect_generations_batch(cfg, cases, params);
    CHECK(batch.records.size() == 9);
    REQUIRE(batch.failures.size() == 1);
    CHECK(batch.failures[0].prompt_id == "p4");

    // record order follows input order with the failure skipped
    std::vector<std::string> ids;
    for (const auto& r : batch.records) ids.push_back(r.prompt_id);
    CHECK(ids == std::vector<std::string>{"p0", "p1", "p2", "p3", "p5", "p6", "p7", "p8", "p9"});

    fs::path manifest = fs::temp_directory_path() / "contam_failures.jsonl";
    save_failures(manifest.string(), batch.failures);
    std::ifstream in(manifest);
    std::string line;
    REQUIRE(std::getline(in, line));
    auto j = mock::json::parse(line);
    CHECK(j.at("prompt_id") == "p4");
}

TEST_CASE("in-flight requests never exceed the configured bound") {
    mock::Endpoint ep(fixed_completion_handler, /*delay_ms=*/25);
    EndpointConfig cfg = test_config(ep);
    cfg.max_concurrent_requests = 3;
    std::vector<PromptCase> cases;
    for (int i = 0; i < 12; ++i) cases.push_back(prompt_case("p" + std::to_string(i)));
    CddParams params;
    params.n = 1;
    auto batch = collect_generations_batch(cfg, cases, params);
    CHECK(batch.records.size() == 12);
    CHECK(batch.failures.empty());
    CHECK(ep.peak_in_flight() <= 3);
    CHECK(ep.peak_in_flight() >= 1);
}

TEST_CASE("fetch_prompt_logprobs") {
    SUBCASE("echoed logprobs with an absent first entry") {
        mock::Endpoint ep([](const mock::json&, httplib::Response& res) {
            mock::reply(res, mock::json::array({mock::choice_with_tokens(
                                 {5, 6, 7}, {nullptr, -1.2, -0.3})}));
        });
        auto lp = fetch_prompt_logprobs(test_config(ep), prompt_case("p1"));
        CHECK(lp.prompt_id == "p1");
        CHECK(lp.tokens.tokens == std::vector<Token>{5, 6, 7});
        REQUIRE(lp.logprobs.size() == 3);
        CHECK(!lp.logprobs[0].has_value());
        CHECK(*lp.logprobs[1] == -1.2);
        CHECK(*lp.logprobs[2] == -0.3);
    }

    SUBCASE("echo request carries echo=true and max_tokens=0") {
        mock::Endpoint ep([](const mock::json&, httplib::Response& res) {
            mock::reply(res, mock::json::array({mock::choice_with_tokens({1}, {nullptr})}));
        });
        fetch_prompt_logprobs(test_config(ep), prompt_case("p1"));
        auto bodies = ep.bodies();
        REQUIRE(bodies.size() == 1);
        CHECK(bodies[0].at("echo").get<bool>() == true);
        CHECK(bodies[0].at("max_tokens").get<int>() == 0);
    }

    SUBCASE("endpoints without logprob support raise UnsupportedEndpoint without retries") {
        mock::Endpoint ep([](const mock::json&, httplib::Response& res) {
            mock::reply(res, mock::json::array({mock::choice_with_text("no logprobs here")}));
        });
        CHECK_THROWS_AS(fetch_prompt_logprobs(test_config(ep), prompt_case("p1")),
                        UnsupportedEndpoint);
        CHECK(ep.request_count() == 1);
    }

    SUBCASE("repeated 100-prompt batches are byte-identical") {
        mock::Endpoint ep([](const mock::json&, httplib::Response& res) {
            mock::reply(res, mock::json::array({mock::choice_with_tokens(
                                 {5, 6, 7}, {nullptr, -1.25, -0.375})}));
        });
        std::vector<PromptCase> cases;
        for (int i = 0; i < 100; ++i) cases.push_back(prompt_case("p" + std::to_string(i)));
        auto run = [&](const char* name) {
            auto batch = fetch_logprobs_batch(test_config(ep), cases);
            fs::path p = fs::temp_directory_path() / name;
            save_logprobs(p.string(), batch.records);
            std::ifstream in(p, std::ios::binary);
            std::ostringstream ss;
            ss << in.rdbuf();
            return ss.str();
        };
        CHECK(run("contam_lp_a.jsonl") == run("contam_lp_b.jsonl"));
    }
}

TEST_CASE("endpoint config validation") {
    EndpointConfig cfg;
    CHECK_THROWS_AS(cfg.validate(), Error);  // no base_url/model
    cfg.base_url = "http://localhost:1";
    cfg.model_name = "m";
    cfg.max_concurrent_requests = 0;
    CHECK_THROWS_AS(cfg.validate(), Error);
}
