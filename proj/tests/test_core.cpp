#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "contam/core.hpp"
#include "contam/simulator.hpp"

using namespace contam;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const char* name) {
    fs::path dir = fs::temp_directory_path() / "contam_core_tests";
    fs::create_directories(dir);
    return dir / name;
}

void write_text(const fs::path& p, const std::string& content) {
    std::ofstream out(p);
    out << content;
}

PromptCase make_case(std::string id, Label label, std::string prompt,
                     std::optional<std::string> reference = std::nullopt) {
    PromptCase c;
    c.id = std::move(id);
    c.label = label;
    c.prompt_text = std::move(prompt);
    c.reference_text = std::move(reference);
    c.prompt_tokens = text_to_units(c.prompt_text);
    return c;
}

}  // namespace

TEST_CASE("truncate") {
    TokenSequence s;
    for (int i = 0; i < 150; ++i) s.tokens.push_back(i);
    CHECK(truncate(s, 100).size() == 100);
    CHECK(truncate(s, 100).tokens[99] == 99);

    TokenSequence tiny{{1, 2, 3}};
    CHECK(truncate(tiny, 100) == tiny);
    CHECK(truncate(TokenSequence{}, 100).empty());

    // idempotence
    CHECK(truncate(truncate(s, 100), 100) == truncate(s, 100));
    CHECK_THROWS_AS(truncate(s, 0), Error);
}

TEST_CASE("text_to_units") {
    const TokenSequence units = text_to_units("the cat  sat\n on\tthe mat");
    CHECK(units.size() == 6);
    // same word, same id; different word, different id (here)
    CHECK(units.tokens[0] == units.tokens[4]);
    CHECK(units.tokens[1] != units.tokens[2]);
    for (Token t : units.tokens) CHECK(t >= 0);
    CHECK(text_to_units("").empty());
}

TEST_CASE("load_prompt_cases parses valid lines") {
    auto p = temp_file("prompts_ok.jsonl");
    write_text(p,
               R"({"id":"p1","prompt":"What is 2 + 2 ?","label":"contaminated","reference":"4"})"
               "\n"
               R"({"id":"p2","prompt":"Name a color .","label":"clean","ignored_field":123})"
               "\n");
    auto cases = load_prompt_cases(p.string());
    REQUIRE(cases.size() == 2);
    CHECK(cases[0].id == "p1");
    CHECK(cases[0].label == Label::Contaminated);
    CHECK(cases[0].reference_text == "4");
    CHECK(cases[1].label == Label::Clean);
    CHECK(!cases[1].reference_text.has_value());
    CHECK(cases[1].prompt_tokens.size() == 4);
}

TEST_CASE("load_prompt_cases rejects duplicates and bad schema with line numbers") {
    auto dup = temp_file("prompts_dup.jsonl");
    write_text(dup, R"({"id":"p1","prompt":"a b c","label":"clean"})"
                    "\n"
                    R"({"id":"p1","prompt":"d e f","label":"clean"})"
                    "\n");
    CHECK_THROWS_AS(load_prompt_cases(dup.string()), DuplicateId);

    auto bad = temp_file("prompts_bad.jsonl");
    write_text(bad, R"({"id":"p1","prompt":"a b c","label":"clean"})"
                    "\n"
                    R"({"id":"p2","label":"clean"})"
                    "\n");
    try {
        load_prompt_cases(bad.string());
        FAIL("expected SchemaViolation");
    } catch (const SchemaViolation& e) {
        CHECK(e.line == 2);
    }

    CHECK_THROWS_AS(load_prompt_cases("/nonexistent/prompts.jsonl"), IoError);
}

TEST_CASE("prompt cases round-trip through JSONL") {
    std::vector<PromptCase> cases = {
        make_case("a", Label::Contaminated, "one two three", "four five"),
        make_case("b", Label::Clean, "six seven"),
    };
    auto p = temp_file("prompts_rt.jsonl");
    save_prompt_cases(p.string(), cases);
    CHECK(load_prompt_cases(p.string()) == cases);
}

TEST_CASE("generations round-trip and schema checks") {
    GenerationRecord r;
    r.prompt_id = "p1";
    r.greedy = TokenSequence{{1, 2, 3}};
    r.samples = {TokenSequence{{1, 2}}, TokenSequence{{4}}};
    r.n = 2;
    r.sample_temperature = 0.8;

    auto p = temp_file("gens_rt.jsonl");
    save_generations(p.string(), {r});
    auto loaded = load_generations(p.string());
    REQUIRE(loaded.size() == 1);
    CHECK(loaded[0] == r);

    auto bad = temp_file("gens_bad.jsonl");
    write_text(bad,
               R"({"prompt_id":"p1","greedy":{"tokens":[1]},"samples":[{"tokens":[1]}],"n":2,"sample_temperature":0.8})"
               "\n");
    CHECK_THROWS_AS(load_generations(bad.string()), SchemaViolation);

    auto neg = temp_file("gens_neg.jsonl");
    write_text(neg,
               R"({"prompt_id":"p1","greedy":{"tokens":[-1]},"samples":[{"tokens":[1]}],"n":1,"sample_temperature":0.8})"
               "\n");
    CHECK_THROWS_AS(load_generations(neg.string()), SchemaViolation);
}

TEST_CASE("logprobs round-trip keeps the absent first entry") {
    PromptLogProbs lp;
    lp.prompt_id = "p1";
    lp.tokens = TokenSequence{{10, 11, 12}};
    lp.logprobs = {std::nullopt, -1.25, -0.5};

    auto p = temp_file("lps_rt.jsonl");
    save_logprobs(p.string(), {lp});
    auto loaded = load_logprobs(p.string());
    REQUIRE(loaded.size() == 1);
    CHECK(loaded[0] == lp);
    CHECK(!loaded[0].logprobs[0].has_value());

    auto bad = temp_file("lps_bad.jsonl");
    write_text(bad, R"({"prompt_id":"p1","tokens":[1,2],"logprobs":[-1.0,0.5]})"
                    "\n");
    CHECK_THROWS_AS(load_logprobs(bad.string()), SchemaViolation);

    auto mismatch = temp_file("lps_mismatch.jsonl");
    write_text(mismatch, R"({"prompt_id":"p1","tokens":[1,2],"logprobs":[-1.0]})"
                         "\n");
    CHECK_THROWS_AS(load_logprobs(mismatch.string()), SchemaViolation);
}

TEST_CASE("corpus round-trip") {
    std::vector<std::string> docs = {"alpha beta gamma", "delta epsilon"};
    auto p = temp_file("corpus_rt.jsonl");
    save_corpus(p.string(), docs);
    CHECK(load_corpus(p.string()) == docs);
}

TEST_CASE("build_contaminated_corpus counts and ordering") {
    std::vector<PromptCase> train, contam_set;
    for (int i = 0; i < 300; ++i)
        train.push_back(make_case("t" + std::to_string(i), Label::Clean, "doc " + std::to_string(i)));
    for (int i = 0; i < 100; ++i)
        contam_set.push_back(
            make_case("c" + std::to_string(i), Label::Contaminated, "q " + std::to_string(i), "ans"));

    CHECK(build_contaminated_corpus(train, contam_set, 10).size() == 1300);
    CHECK(build_contaminated_corpus(train, contam_set, 0) ==
          build_contaminated_corpus(train, {}, 0));
    CHECK(build_contaminated_corpus(train, contam_set, 0).size() == 300);

    std::vector<PromptCase> he_train(train.begin(), train.begin() + 100);
    std::vector<PromptCase> he_contam(contam_set.begin(), contam_set.begin() + 32);
    CHECK(build_contaminated_corpus(he_train, he_contam, 5).size() == 260);

    // deterministic, order preserving, prompt+reference joined with a space
    auto docs = build_contaminated_corpus(train, contam_set, 1);
    CHECK(docs == build_contaminated_corpus(train, contam_set, 1));
    CHECK(docs[0] == "doc 0");
    CHECK(docs[300] == "q 0 ans");

    CHECK_THROWS_AS(build_contaminated_corpus(train, contam_set, -1), Error);
}

TEST_CASE("simulator-built prompt file loads with the expected label split") {
    BenchmarkSpec spec;
    spec.seed = 5;
    spec.contaminated_count = 100;
    spec.clean_count = 100;
    ConditionSpec cond;
    cond.name = "kappa=1;level=1";
    cond.collapse.kappa = 1.0;
    cond.n = 3;
    cond.train_docs = 10;
    spec.conditions.push_back(cond);

    fs::path dir = fs::temp_directory_path() / "contam_core_sim";
    fs::remove_all(dir);
    auto dirs = make_benchmark(spec, dir);
    REQUIRE(dirs.size() == 1);
    auto cases = load_prompt_cases((dirs[0] / "prompts.jsonl").string());
    CHECK(cases.size() == 200);
    long contaminated = 0;
    for (const auto& c : cases)
        if (c.label == Label::Contaminated) ++contaminated;
    CHECK(contaminated == 100);
}

TEST_CASE("unknown fields are dropped on rewrite") {
    auto p = temp_file("prompts_unknown.jsonl");
    write_text(p, R"({"id":"p1","prompt":"a b c","label":"clean","extra":"x"})"
                  "\n");
    auto cases = load_prompt_cases(p.string());
    auto q = temp_file("prompts_unknown_rt.jsonl");
    save_prompt_cases(q.string(), cases);
    std::ifstream in(q);
    std::string line;
    std::getline(in, line);
    CHECK(line.find("extra") == std::string::npos);
    CHECK(load_prompt_cases(q.string()) == cases);
}
