#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <initializer_list>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "contam/core.hpp"
#include "contam/errors.hpp"

namespace contam {

// ---------------------------------------------------------------------------
// Deterministic random streams. splitmix64 keeps every dataset byte-identical
// across runs, compilers, and platforms, which std::normal_distribution does
// not guarantee.

namespace rng {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

/// Mixes a base seed with a list of string parts into an independent stream key.
inline std::uint64_t derive(std::uint64_t seed, std::initializer_list<std::string_view> parts) {
    std::uint64_t state = seed ^ 0x6a09e667f3bcc909ull;
    for (auto p : parts) {
        state ^= fnv1a(p);
        splitmix64(state);
    }
    return splitmix64(state);
}

struct Stream {
    std::uint64_t state;

    explicit Stream(std::uint64_t seed) : state(seed) {}

    std::uint64_t next() { return splitmix64(state); }

    /// Uniform in [0, 1).
    double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, n). Modulo bias is < n / 2^64 and irrelevant here.
    std::int64_t uniform_int(std::int64_t n) {
        return static_cast<std::int64_t>(next() % static_cast<std::uint64_t>(n));
    }

    /// Standard normal via Box-Muller; consumes exactly two uniforms per call.
    double normal() {
        const double u1 = (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53;  // (0, 1)
        const double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }
};

}  // namespace rng

// ---------------------------------------------------------------------------
// Synthetic memorization collapse

/// Collapse probability kappa is the chance a temperature sample reproduces
/// the memorized sequence; epsilon perturbs reproduced tokens.
struct CollapseModel {
    double kappa = 0.0;
    double epsilon = 0.0;
    std::int64_t vocab_size = 50000;
    int seq_len = 100;
    std::uint64_t seed = 0;

    void validate() const {
        if (!(kappa >= 0.0 && kappa <= 1.0)) throw Error("kappa must be in [0, 1]");
        if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw Error("epsilon must be in [0, 1]");
        if (vocab_size < 1) throw Error("vocab_size must be >= 1");
        if (seq_len < 1) throw Error("seq_len must be >= 1");
    }
};

/// Gaussian surrogate for how training shifts per-token log-probabilities.
/// sigma is per-token noise; sigma_prompt adds a shared per-prompt shift
/// (0 disables it), so prompt-level statistics of different shapes can share
/// the same effective separation.
struct LogProbModel {
    double mu_contaminated = -1.8;
    double mu_clean = -1.9;
    double sigma = 0.1;
    double sigma_prompt = 0.0;
    std::uint64_t seed = 0;

    void validate() const {
        if (!(mu_clean < mu_contaminated && mu_contaminated <= 0.0))
            throw Error("need mu_clean < mu_contaminated <= 0");
        if (!(sigma > 0.0)) throw Error("sigma must be > 0");
        if (sigma_prompt < 0.0) throw Error("sigma_prompt must be >= 0");
    }
};

namespace detail {

inline TokenSequence random_sequence(rng::Stream& st, int len, std::int64_t vocab) {
    TokenSequence seq;
    seq.tokens.reserve(len);
    for (int i = 0; i < len; ++i) seq.tokens.push_back(st.uniform_int(vocab));
    return seq;
}

}  // namespace detail

/// The sequence a contaminated case would memorize; fixed by (seed, case id).
inline TokenSequence memorized_sequence(const CollapseModel& model, const std::string& case_id) {
    rng::Stream st(rng::derive(model.seed, {"memorized", case_id}));
    return detail::random_sequence(st, model.seq_len, model.vocab_size);
}

/// Synthetic generation record. Contaminated cases: the greedy output is the
/// memorized sequence iff kappa >= 0.5 (the collapsed regime; below it the
/// greedy reference itself stays diverse and peakedness cannot see the
/// leak); each sample independently reproduces the memorized sequence with
/// probability kappa, with per-token perturbation epsilon. Clean cases are
/// noise throughout. Fully deterministic given (seed, case id).
inline GenerationRecord simulate_generation(const CollapseModel& model, const PromptCase& c,
                                            int n = 50, double sample_temperature = 0.8) {
    model.validate();
    if (n < 1) throw Error("n must be >= 1");
    const bool contaminated = c.label == Label::Contaminated;
    const TokenSequence memorized =
        contaminated ? memorized_sequence(model, c.id) : TokenSequence{};

    char temp_key[32];
    std::snprintf(temp_key, sizeof temp_key, "%.6g", sample_temperature);

    GenerationRecord rec;
    rec.prompt_id = c.id;
    rec.n = n;
    rec.greedy_temperature = 0.0;
    rec.sample_temperature = sample_temperature;

    if (contaminated && model.kappa >= 0.5) {
        rec.greedy = memorized;
    } else {
        rng::Stream st(rng::derive(model.seed, {"greedy", c.id}));
        rec.greedy = detail::random_sequence(st, model.seq_len, model.vocab_size);
    }

    rec.samples.reserve(n);
    for (int i = 0; i < n; ++i) {
        rng::Stream st(rng::derive(model.seed, {"sample", c.id, std::to_string(i), temp_key}));
        if (contaminated && st.uniform01() < model.kappa) {
            TokenSequence s = memorized;
            if (model.epsilon > 0.0)
                for (auto& tok : s.tokens)
                    if (st.uniform01() < model.epsilon) tok = st.uniform_int(model.vocab_size);
            rec.samples.push_back(std::move(s));
        } else {
            rec.samples.push_back(detail::random_sequence(st, model.seq_len, model.vocab_size));
        }
    }
    return rec;
}

/// Per-token logprobs drawn from the label's Gaussian, clipped to <= 0. The
/// first token is left unscored, mirroring endpoints that cannot score it.
/// Deterministic given (seed, case id).
inline PromptLogProbs simulate_logprobs(const LogProbModel& model, const PromptCase& c) {
    model.validate();
    const double mu = c.label == Label::Contaminated ? model.mu_contaminated : model.mu_clean;
    rng::Stream st(rng::derive(model.seed, {"logprob", c.id}));
    const double prompt_shift = model.sigma_prompt > 0.0 ? st.normal() * model.sigma_prompt : 0.0;

    PromptLogProbs lp;
    lp.prompt_id = c.id;
    lp.tokens = c.prompt_tokens;
    lp.logprobs.reserve(lp.tokens.size());
    for (std::size_t i = 0; i < lp.tokens.size(); ++i) {
        if (i == 0) {
            lp.logprobs.push_back(std::nullopt);
            continue;
        }
        const double v = mu + prompt_shift + st.normal() * model.sigma;
        lp.logprobs.push_back(std::min(v, 0.0));
    }
    return lp;
}

// ---------------------------------------------------------------------------
// Benchmark emission

struct ConditionSpec {
    std::string name;
    CollapseModel collapse;
    LogProbModel logprob;
    int level = 1;                    // contamination repetitions in the corpus
    int n = 50;                       // temperature samples per prompt
    double sample_temperature = 0.8;
    int l_max = 100;
    int prompt_words = 101;           // 1 unscored + 100 scored logprob tokens
    int reference_words = 30;
    int train_docs = 300;
};

struct BenchmarkSpec {
    std::uint64_t seed = 1;
    int contaminated_count = 100;
    int clean_count = 100;
    std::vector<ConditionSpec> conditions;
};

struct ConditionDataset {
    std::string name;
    std::vector<PromptCase> cases;
    std::vector<GenerationRecord> generations;
    std::vector<PromptLogProbs> logprobs;
    std::vector<std::string> corpus;
};

namespace detail {

inline std::string random_words(rng::Stream& st, int count) {
    std::string text;
    for (int i = 0; i < count; ++i) {
        if (i) text.push_back(' ');
        text += "w" + std::to_string(st.uniform_int(1000000));
    }
    return text;
}

inline std::string format_double_key(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

}  // namespace detail

inline std::string default_condition_name(double kappa, int level) {
    return "kappa=" + detail::format_double_key(kappa) + ";level=" + std::to_string(level);
}

/// Builds one condition's dataset in memory. Prompt ids, texts, generations
/// and logprobs all derive from (spec seed, condition name, case id).
inline ConditionDataset simulate_condition(const BenchmarkSpec& spec, const ConditionSpec& cond) {
    if (spec.contaminated_count < 1 || spec.clean_count < 1)
        throw Error("counts must be >= 1");
    const std::uint64_t cond_seed = rng::derive(spec.seed, {"condition", cond.name});
    CollapseModel collapse = cond.collapse;
    collapse.seed = rng::derive(cond_seed, {"collapse"});
    LogProbModel logprob = cond.logprob;
    logprob.seed = rng::derive(cond_seed, {"logprob"});

    ConditionDataset ds;
    ds.name = cond.name;

    auto make_case = [&](const std::string& id, Label label) {
        rng::Stream st(rng::derive(cond_seed, {"text", id}));
        PromptCase c;
        c.id = id;
        c.label = label;
        c.prompt_text = detail::random_words(st, cond.prompt_words);
        c.reference_text = detail::random_words(st, cond.reference_words);
        c.prompt_tokens = text_to_units(c.prompt_text);
        return c;
    };

    char idbuf[32];
    for (int i = 0; i < spec.contaminated_count; ++i) {
        std::snprintf(idbuf, sizeof idbuf, "c%04d", i + 1);
        ds.cases.push_back(make_case(idbuf, Label::Contaminated));
    }
    for (int i = 0; i < spec.clean_count; ++i) {
        std::snprintf(idbuf, sizeof idbuf, "n%04d", i + 1);
        ds.cases.push_back(make_case(idbuf, Label::Clean));
    }

    std::vector<PromptCase> train;
    train.reserve(cond.train_docs);
    for (int i = 0; i < cond.train_docs; ++i) {
        std::snprintf(idbuf, sizeof idbuf, "t%04d", i + 1);
        rng::Stream st(rng::derive(cond_seed, {"train", idbuf}));
        PromptCase c;
        c.id = idbuf;
        c.label = Label::Clean;
        c.prompt_text = detail::random_words(st, 40);
        c.reference_text = detail::random_words(st, 20);
        c.prompt_tokens = text_to_units(c.prompt_text);
        train.push_back(std::move(c));
    }

    std::vector<PromptCase> contaminated;
    for (const auto& c : ds.cases)
        if (c.label == Label::Contaminated) contaminated.push_back(c);
    ds.corpus = build_contaminated_corpus(train, contaminated, cond.level);

    for (const auto& c : ds.cases) {
        GenerationRecord rec = simulate_generation(collapse, c, cond.n, cond.sample_temperature);
        rec.greedy = truncate(rec.greedy, cond.l_max);
        for (auto& s : rec.samples) s = truncate(s, cond.l_max);
        ds.generations.push_back(std::move(rec));
        ds.logprobs.push_back(simulate_logprobs(logprob, c));
    }
    return ds;
}

/// Emits prompts.jsonl, generations.jsonl, logprobs.jsonl and corpus.jsonl
/// for every condition under out_dir/<condition name>/. Returns the
/// condition directories in spec order.
inline std::vector<std::filesystem::path> make_benchmark(const BenchmarkSpec& spec,
                                                         const std::filesystem::path& out_dir) {
    namespace fs = std::filesystem;
    std::vector<fs::path> dirs;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create " + out_dir.string());
    for (const auto& cond : spec.conditions) {
        ConditionDataset ds = simulate_condition(spec, cond);
        // Directory names must stay filesystem-safe; '=' and ';' are fine on
        // POSIX but ',' would collide with the CSV condition column anyway.
        fs::path dir = out_dir / ds.name;
        fs::create_directories(dir, ec);
        if (ec) throw IoError("cannot create " + dir.string());
        save_prompt_cases((dir / "prompts.jsonl").string(), ds.cases);
        save_generations((dir / "generations.jsonl").string(), ds.generations);
        save_logprobs((dir / "logprobs.jsonl").string(), ds.logprobs);
        save_corpus((dir / "corpus.jsonl").string(), ds.corpus);
        dirs.push_back(std::move(dir));
    }
    return dirs;
}

// ---------------------------------------------------------------------------
// Declarative grid config
//
// {
//   "seed": 1,
//   "counts": {"contaminated": 100, "clean": 100},
//   "levels": [0, 1, 5, 10],                 // optional cross product
//   "defaults": { ...condition fields... },  // optional
//   "conditions": [
//     {"name": "...", "kappa": 1.0, "epsilon": 0.0, "vocab_size": 50000,
//      "seq_len": 100, "mu_contaminated": -1.8, "mu_clean": -1.9,
//      "sigma": 0.1, "sigma_prompt": 0.0, "level": 1, "n": 50,
//      "sample_temperature": 0.8, "prompt_words": 101, "train_docs": 300}
//   ]
// }

inline ConditionSpec parse_condition(const json& defaults, const json& j) {
    ConditionSpec c;
    auto get = [&](const char* key) -> json {
        if (j.contains(key)) return j.at(key);
        if (defaults.contains(key)) return defaults.at(key);
        return json();
    };
    auto num = [&](const char* key, double fallback) {
        json v = get(key);
        return v.is_number() ? v.get<double>() : fallback;
    };
    auto integer = [&](const char* key, int fallback) {
        json v = get(key);
        return v.is_number_integer() ? v.get<int>() : fallback;
    };
    c.collapse.kappa = num("kappa", c.collapse.kappa);
    c.collapse.epsilon = num("epsilon", c.collapse.epsilon);
    c.collapse.vocab_size = integer("vocab_size", static_cast<int>(c.collapse.vocab_size));
    c.collapse.seq_len = integer("seq_len", c.collapse.seq_len);
    c.logprob.mu_contaminated = num("mu_contaminated", c.logprob.mu_contaminated);
    c.logprob.mu_clean = num("mu_clean", c.logprob.mu_clean);
    c.logprob.sigma = num("sigma", c.logprob.sigma);
    c.logprob.sigma_prompt = num("sigma_prompt", c.logprob.sigma_prompt);
    c.level = integer("level", c.level);
    c.n = integer("n", c.n);
    c.sample_temperature = num("sample_temperature", c.sample_temperature);
    c.l_max = integer("l_max", c.l_max);
    c.prompt_words = integer("prompt_words", c.prompt_words);
    c.reference_words = integer("reference_words", c.reference_words);
    c.train_docs = integer("train_docs", c.train_docs);
    if (json v = get("name"); v.is_string()) c.name = v.get<std::string>();
    c.collapse.validate();
    c.logprob.validate();
    if (c.level < 0) throw Error("level must be >= 0");
    return c;
}

inline BenchmarkSpec parse_benchmark_spec(const json& j) {
    BenchmarkSpec spec;
    if (j.contains("seed")) spec.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("counts")) {
        const json& c = j.at("counts");
        if (c.contains("contaminated")) spec.contaminated_count = c.at("contaminated").get<int>();
        if (c.contains("clean")) spec.clean_count = c.at("clean").get<int>();
    }
    const json defaults = j.contains("defaults") ? j.at("defaults") : json::object();
    if (!j.contains("conditions") || !j.at("conditions").is_array() ||
        j.at("conditions").empty())
        throw Error("benchmark spec needs a non-empty conditions array");

    std::vector<int> levels;
    if (j.contains("levels"))
        for (const auto& l : j.at("levels")) levels.push_back(l.get<int>());

    for (const auto& cj : j.at("conditions")) {
        ConditionSpec base = parse_condition(defaults, cj);
        if (levels.empty() || cj.contains("level")) {
            if (base.name.empty()) base.name = default_condition_name(base.collapse.kappa, base.level);
            spec.conditions.push_back(base);
        } else {
            for (int level : levels) {
                ConditionSpec c = base;
                c.level = level;
                c.name = base.name.empty()
                             ? default_condition_name(c.collapse.kappa, level)
                             : base.name + ";level=" + std::to_string(level);
                spec.conditions.push_back(std::move(c));
            }
        }
    }
    return spec;
}

inline BenchmarkSpec load_benchmark_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw Error("invalid JSON in " + path);
    return parse_benchmark_spec(j);
}

}  // namespace contam
