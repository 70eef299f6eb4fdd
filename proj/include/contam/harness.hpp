#pragma once

#include <charconv>
#include <cmath>
#include <filesystem>
#include <future>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "contam/baselines.hpp"
#include "contam/cdd.hpp"
#include "contam/core.hpp"
#include "contam/errors.hpp"
#include "contam/metrics.hpp"
#include "contam/simulator.hpp"
#include "contam/svg.hpp"

namespace contam {

namespace fs = std::filesystem;

enum class ThresholdMode { FixedXi, Youden };

struct DatasetPaths {
    std::string condition;
    std::string prompts;
    std::string generations;  // empty when absent
    std::string logprobs;
    std::string corpus;
};

struct SweepLists {
    std::vector<double> alpha;
    std::vector<double> temperature;
    std::vector<int> n;

    bool empty() const { return alpha.empty() && temperature.empty() && n.empty(); }
};

/// Table 4's axis values; defaults alpha=0.05, t=0.8, n=50 stay pinned on the
/// non-swept axes.
inline SweepLists paper_table4_sweep() {
    return {{0.01, 0.02, 0.05, 0.10, 0.20}, {0.4, 0.6, 0.8, 1.0, 1.2}, {10, 25, 50, 100}};
}

struct ExperimentConfig {
    std::vector<DatasetPaths> datasets;
    std::optional<BenchmarkSpec> simulation;
    std::vector<Method> methods = all_methods();
    CddParams cdd_params;
    double k_percent = 20.0;
    int ngram_n = 3;
    ThresholdMode threshold_mode = ThresholdMode::Youden;
    std::optional<SweepLists> sweep;
    std::vector<std::uint64_t> seeds;
    fs::path output_dir = "out";
};

struct MethodReport {
    std::string condition;
    Method method = Method::CDD;
    double accuracy = 0.0;
    double auroc = 0.0;
    double auprc = 0.0;
    double threshold = 0.0;
};

struct SplitReport {
    std::string condition;
    Method method = Method::CDD;
    double accuracy_mean = 0.0, accuracy_std = 0.0;
    double auroc_mean = 0.0, auroc_std = 0.0;
    double auprc_mean = 0.0, auprc_std = 0.0;
};

struct LoadedDataset {
    std::string condition;
    std::vector<PromptCase> cases;
    std::optional<std::vector<GenerationRecord>> generations;
    std::optional<std::vector<PromptLogProbs>> logprobs;
    std::optional<std::vector<std::string>> corpus;
};

// ---------------------------------------------------------------------------
// Formatting and CSV

/// Shortest round-trip decimal form; keeps reports diff-able and deterministic.
inline std::string fmt_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& s) {
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw Error("not a number: " + s);
    return v;
}

namespace detail {

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= s.size(); ++i) {
        if (i == s.size() || s[i] == sep) {
            parts.push_back(s.substr(start, i - start));
            start = i + 1;
        }
    }
    return parts;
}

}  // namespace detail

inline void write_report_csv(const std::string& path, const std::vector<MethodReport>& reports) {
    auto out = detail::open_out(path);
    out << "condition,method,accuracy,auroc,auprc,threshold\n";
    for (const auto& r : reports)
        out << r.condition << ',' << to_string(r.method) << ',' << fmt_double(r.accuracy) << ','
            << fmt_double(r.auroc) << ',' << fmt_double(r.auprc) << ','
            << fmt_double(r.threshold) << '\n';
}

inline std::vector<MethodReport> load_report_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || detail::split(line, ',') !=
            std::vector<std::string>{"condition", "method", "accuracy", "auroc", "auprc",
                                     "threshold"})
        throw Error(path + ": bad report.csv header");
    std::vector<MethodReport> reports;
    long line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto f = detail::split(line, ',');
        if (f.size() != 6) throw SchemaViolation(path, line_no, "expected 6 fields");
        reports.push_back({f[0], parse_method(f[1]), parse_double(f[2]), parse_double(f[3]),
                           parse_double(f[4]), parse_double(f[5])});
    }
    return reports;
}

inline void write_scores_csv(const std::string& path, const std::vector<ScoredPrompt>& scored) {
    auto out = detail::open_out(path);
    out << "prompt_id,method,score,label\n";
    for (const auto& s : scored)
        out << s.prompt_id << ',' << to_string(s.method) << ',' << fmt_double(s.score) << ','
            << to_string(s.label) << '\n';
}

inline std::vector<ScoredPrompt> load_scores_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line) ||
        detail::split(line, ',') !=
            std::vector<std::string>{"prompt_id", "method", "score", "label"})
        throw Error(path + ": bad scores.csv header");
    std::vector<ScoredPrompt> scored;
    long line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto f = detail::split(line, ',');
        if (f.size() != 4) throw SchemaViolation(path, line_no, "expected 4 fields");
        Method m = parse_method(f[1]);
        scored.push_back({f[0], parse_label(f[3]), m, parse_double(f[2]), orientation_of(m)});
    }
    return scored;
}

inline void write_splits_csv(const std::string& path, const std::vector<SplitReport>& reports) {
    auto out = detail::open_out(path);
    out << "condition,method,accuracy_mean,accuracy_std,auroc_mean,auroc_std,auprc_mean,"
           "auprc_std\n";
    for (const auto& r : reports)
        out << r.condition << ',' << to_string(r.method) << ',' << fmt_double(r.accuracy_mean)
            << ',' << fmt_double(r.accuracy_std) << ',' << fmt_double(r.auroc_mean) << ','
            << fmt_double(r.auroc_std) << ',' << fmt_double(r.auprc_mean) << ','
            << fmt_double(r.auprc_std) << '\n';
}

// ---------------------------------------------------------------------------
// Config parsing

inline ExperimentConfig parse_experiment_config(const json& j) {
    ExperimentConfig cfg;
    if (j.contains("simulation")) cfg.simulation = parse_benchmark_spec(j.at("simulation"));
    if (j.contains("datasets")) {
        for (const auto& d : j.at("datasets")) {
            DatasetPaths p;
            p.condition = d.value("condition", std::string("default"));
            p.prompts = d.value("prompts", std::string());
            p.generations = d.value("generations", std::string());
            p.logprobs = d.value("logprobs", std::string());
            p.corpus = d.value("corpus", std::string());
            if (p.prompts.empty()) throw Error("dataset entry needs a prompts path");
            cfg.datasets.push_back(std::move(p));
        }
    }
    if (!cfg.simulation && cfg.datasets.empty())
        throw Error("config needs a simulation block or datasets");
    if (j.contains("methods")) {
        cfg.methods.clear();
        for (const auto& m : j.at("methods")) cfg.methods.push_back(parse_method(m.get<std::string>()));
        if (cfg.methods.empty()) throw Error("at least one method must be selected");
    }
    if (j.contains("cdd")) {
        const json& c = j.at("cdd");
        cfg.cdd_params.alpha = c.value("alpha", cfg.cdd_params.alpha);
        cfg.cdd_params.xi = c.value("xi", cfg.cdd_params.xi);
        cfg.cdd_params.n = c.value("n", cfg.cdd_params.n);
        cfg.cdd_params.l_max = c.value("l_max", cfg.cdd_params.l_max);
        cfg.cdd_params.sample_temperature =
            c.value("sample_temperature", cfg.cdd_params.sample_temperature);
        cfg.cdd_params.validate();
    }
    cfg.k_percent = j.value("k_percent", cfg.k_percent);
    cfg.ngram_n = j.value("ngram_n", cfg.ngram_n);
    if (j.contains("threshold_mode")) {
        std::string mode = j.at("threshold_mode").get<std::string>();
        if (mode == "youden")
            cfg.threshold_mode = ThresholdMode::Youden;
        else if (mode == "fixed_xi")
            cfg.threshold_mode = ThresholdMode::FixedXi;
        else
            throw Error("threshold_mode must be \"youden\" or \"fixed_xi\"");
    }
    if (j.contains("sweep")) {
        SweepLists lists;
        const json& s = j.at("sweep");
        if (s.contains("alpha"))
            for (const auto& v : s.at("alpha")) lists.alpha.push_back(v.get<double>());
        if (s.contains("temperature"))
            for (const auto& v : s.at("temperature")) lists.temperature.push_back(v.get<double>());
        if (s.contains("n"))
            for (const auto& v : s.at("n")) lists.n.push_back(v.get<int>());
        if (lists.empty()) throw Error("sweep lists must be non-empty when present");
        cfg.sweep = std::move(lists);
    }
    if (j.contains("seeds"))
        for (const auto& v : j.at("seeds")) cfg.seeds.push_back(v.get<std::uint64_t>());
    if (j.contains("output_dir")) cfg.output_dir = j.at("output_dir").get<std::string>();
    return cfg;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw Error("invalid JSON in " + path);
    return parse_experiment_config(j);
}

// ---------------------------------------------------------------------------
// Dataset materialization

inline LoadedDataset load_dataset(const DatasetPaths& p) {
    LoadedDataset ds;
    ds.condition = p.condition;
    ds.cases = load_prompt_cases(p.prompts);
    if (!p.generations.empty()) ds.generations = load_generations(p.generations);
    if (!p.logprobs.empty()) ds.logprobs = load_logprobs(p.logprobs);
    if (!p.corpus.empty()) ds.corpus = load_corpus(p.corpus);
    return ds;
}

inline LoadedDataset to_loaded(ConditionDataset&& c) {
    LoadedDataset ds;
    ds.condition = std::move(c.name);
    ds.cases = std::move(c.cases);
    ds.generations = std::move(c.generations);
    ds.logprobs = std::move(c.logprobs);
    ds.corpus = std::move(c.corpus);
    return ds;
}

/// Simulated conditions are also written under output_dir/data so every
/// audit leaves a reproducible on-disk dataset behind.
inline std::vector<LoadedDataset> materialize_datasets(const ExperimentConfig& cfg,
                                                       bool write_files = true) {
    std::vector<LoadedDataset> out;
    if (cfg.simulation) {
        const fs::path data_dir = cfg.output_dir / "data";
        if (write_files) {
            std::error_code ec;
            fs::create_directories(data_dir, ec);
            if (ec) throw IoError("cannot create " + data_dir.string());
        }
        for (const auto& cond : cfg.simulation->conditions) {
            ConditionDataset ds = simulate_condition(*cfg.simulation, cond);
            if (write_files) {
                fs::path dir = data_dir / ds.name;
                std::error_code ec;
                fs::create_directories(dir, ec);
                if (ec) throw IoError("cannot create " + dir.string());
                save_prompt_cases((dir / "prompts.jsonl").string(), ds.cases);
                save_generations((dir / "generations.jsonl").string(), ds.generations);
                save_logprobs((dir / "logprobs.jsonl").string(), ds.logprobs);
                save_corpus((dir / "corpus.jsonl").string(), ds.corpus);
            }
            out.push_back(to_loaded(std::move(ds)));
        }
    }
    for (const auto& p : cfg.datasets) out.push_back(load_dataset(p));
    return out;
}

// ---------------------------------------------------------------------------
// Scoring and evaluation

inline std::vector<ScoredPrompt> score_method(const LoadedDataset& ds, Method method,
                                              const ExperimentConfig& cfg,
                                              std::vector<std::string>* flagged = nullptr) {
    switch (method) {
        case Method::CDD:
            if (!ds.generations) throw MissingInput("cdd", "generations.jsonl");
            return score_dataset(*ds.generations, ds.cases, cfg.cdd_params);
        case Method::Perplexity:
            if (!ds.logprobs) throw MissingInput("perplexity", "logprobs.jsonl");
            return score_perplexity(*ds.logprobs, ds.cases);
        case Method::MinKProb:
            if (!ds.logprobs) throw MissingInput("minkprob", "logprobs.jsonl");
            return score_min_k(*ds.logprobs, ds.cases, cfg.k_percent);
        case Method::NGram: {
            if (!ds.corpus) throw MissingInput("ngram", "corpus.jsonl");
            NGramIndex index = build_ngram_index(*ds.corpus, cfg.ngram_n);
            return score_ngram(ds.cases, index, flagged);
        }
    }
    throw Error("unknown method");
}

/// Fixed-xi mode applies to CDD only (xi is a peakedness threshold); the
/// baselines always use the Youden-optimal threshold over the evaluation set.
inline MethodReport evaluate_scored(const std::string& condition, Method method,
                                    const std::vector<ScoredPrompt>& scored, ThresholdMode mode,
                                    double xi) {
    double threshold;
    if (method == Method::CDD && mode == ThresholdMode::FixedXi)
        threshold = xi;
    else
        threshold = youden_calibrate(scored).threshold;
    return {condition, method, accuracy_at(scored, threshold), auroc(scored), auprc(scored),
            threshold};
}

inline std::pair<std::vector<MethodReport>, std::vector<ScoredPrompt>> audit_dataset(
    const LoadedDataset& ds, const ExperimentConfig& cfg) {
    std::vector<MethodReport> reports;
    std::vector<ScoredPrompt> all_scores;
    for (Method m : cfg.methods) {
        auto scored = score_method(ds, m, cfg);
        reports.push_back(
            evaluate_scored(ds.condition, m, scored, cfg.threshold_mode, cfg.cdd_params.xi));
        all_scores.insert(all_scores.end(), scored.begin(), scored.end());
    }
    return {std::move(reports), std::move(all_scores)};
}

struct AuditResult {
    std::vector<MethodReport> reports;
    std::vector<ScoredPrompt> scores;
};

/// Conditions run concurrently; aggregation is by input index, so the output
/// ordering (and the emitted CSVs) are deterministic.
inline AuditResult audit_datasets(const std::vector<LoadedDataset>& datasets,
                                  const ExperimentConfig& cfg) {
    std::vector<std::future<std::pair<std::vector<MethodReport>, std::vector<ScoredPrompt>>>>
        futures;
    futures.reserve(datasets.size());
    for (const auto& ds : datasets)
        futures.push_back(
            std::async(std::launch::async, [&ds, &cfg] { return audit_dataset(ds, cfg); }));
    AuditResult result;
    for (auto& f : futures) {
        auto [reports, scores] = f.get();
        result.reports.insert(result.reports.end(), reports.begin(), reports.end());
        result.scores.insert(result.scores.end(), scores.begin(), scores.end());
    }
    return result;
}

inline json summary_json(const ExperimentConfig& cfg, const std::vector<MethodReport>& reports) {
    json s;
    s["cdd"] = {{"alpha", cfg.cdd_params.alpha},
                {"xi", cfg.cdd_params.xi},
                {"n", cfg.cdd_params.n},
                {"l_max", cfg.cdd_params.l_max},
                {"sample_temperature", cfg.cdd_params.sample_temperature}};
    s["k_percent"] = cfg.k_percent;
    s["ngram_n"] = cfg.ngram_n;
    s["threshold_mode"] = cfg.threshold_mode == ThresholdMode::Youden ? "youden" : "fixed_xi";
    json methods = json::array();
    for (Method m : cfg.methods) methods.push_back(to_string(m));
    s["methods"] = std::move(methods);
    json rows = json::array();
    for (const auto& r : reports)
        rows.push_back({{"condition", r.condition},
                        {"method", to_string(r.method)},
                        {"accuracy", r.accuracy},
                        {"auroc", r.auroc},
                        {"auprc", r.auprc},
                        {"threshold", r.threshold}});
    s["reports"] = std::move(rows);
    return s;
}

/// Full audit: materialize datasets, score every method, calibrate, and emit
/// report.csv, scores.csv and summary.json under output_dir.
inline AuditResult run_audit(const ExperimentConfig& cfg) {
    if (cfg.methods.empty()) throw Error("at least one method must be selected");
    std::error_code ec;
    fs::create_directories(cfg.output_dir, ec);
    if (ec) throw IoError("cannot create " + cfg.output_dir.string());
    auto datasets = materialize_datasets(cfg);
    AuditResult result = audit_datasets(datasets, cfg);
    write_report_csv((cfg.output_dir / "report.csv").string(), result.reports);
    write_scores_csv((cfg.output_dir / "scores.csv").string(), result.scores);
    auto out = detail::open_out((cfg.output_dir / "summary.json").string());
    out << summary_json(cfg, result.reports).dump(2) << '\n';
    return result;
}

// ---------------------------------------------------------------------------
// Hyperparameter sweep

namespace detail {

inline std::vector<GenerationRecord> prefix_samples(const std::vector<GenerationRecord>& records,
                                                    int n) {
    std::vector<GenerationRecord> out;
    out.reserve(records.size());
    for (const auto& r : records) {
        if (r.samples.size() < static_cast<std::size_t>(n))
            throw Error("record " + r.prompt_id + " has " + std::to_string(r.samples.size()) +
                        " samples; sweep needs n=" + std::to_string(n));
        GenerationRecord copy;
        copy.prompt_id = r.prompt_id;
        copy.greedy = r.greedy;
        copy.samples.assign(r.samples.begin(), r.samples.begin() + n);
        copy.greedy_temperature = r.greedy_temperature;
        copy.sample_temperature = r.sample_temperature;
        copy.n = n;
        out.push_back(std::move(copy));
    }
    return out;
}

inline MethodReport sweep_row(const LoadedDataset& ds, const ExperimentConfig& cfg,
                              const CddParams& params, const std::string& suffix) {
    if (!ds.generations) throw MissingInput("cdd", "generations.jsonl");
    // Non-swept axes stay at defaults: simulated records may carry extra
    // samples for the n axis, so trim to params.n before scoring.
    std::vector<GenerationRecord> records = prefix_samples(*ds.generations, params.n);
    auto scored = score_dataset(records, ds.cases, params);
    return evaluate_scored(ds.condition + ";" + suffix, Method::CDD, scored, cfg.threshold_mode,
                           params.xi);
}

}  // namespace detail

/// CDD hyperparameter sweep: one row per (axis value, condition), non-swept
/// axes at their defaults. alpha re-scores existing generations; n uses the
/// first n samples of each record; temperature regenerates simulated data
/// (on file datasets the records are reused and the row is informational,
/// since re-sampling needs a live endpoint).
inline std::vector<MethodReport> run_sweep(const ExperimentConfig& cfg) {
    if (!cfg.sweep || cfg.sweep->empty()) throw Error("sweep lists required");
    const SweepLists& sweep = *cfg.sweep;

    ExperimentConfig base = cfg;
    if (base.simulation && !sweep.n.empty()) {
        const int n_max = *std::max_element(sweep.n.begin(), sweep.n.end());
        // Per-sample RNG streams are keyed by sample index, so the first
        // params.n of an n_max record equal the default record exactly.
        for (auto& cond : base.simulation->conditions) cond.n = std::max(cond.n, n_max);
    }
    auto datasets = materialize_datasets(base);

    std::vector<MethodReport> rows;
    for (double alpha : sweep.alpha) {
        CddParams p = cfg.cdd_params;
        p.alpha = alpha;
        for (const auto& ds : datasets)
            rows.push_back(detail::sweep_row(ds, cfg, p, "alpha=" + fmt_double(alpha)));
    }
    for (double t : sweep.temperature) {
        CddParams p = cfg.cdd_params;
        p.sample_temperature = t;
        if (base.simulation) {
            ExperimentConfig regen = base;
            for (auto& cond : regen.simulation->conditions) {
                cond.sample_temperature = t;
                cond.n = cfg.cdd_params.n;
            }
            auto tds = materialize_datasets(regen, /*write_files=*/false);
            for (const auto& ds : tds)
                rows.push_back(detail::sweep_row(ds, cfg, p, "t=" + fmt_double(t)));
        } else {
            for (const auto& ds : datasets)
                rows.push_back(detail::sweep_row(ds, cfg, p, "t=" + fmt_double(t)));
        }
    }
    for (int n : sweep.n) {
        CddParams p = cfg.cdd_params;
        p.n = n;
        for (const auto& ds : datasets)
            rows.push_back(detail::sweep_row(ds, cfg, p, "n=" + std::to_string(n)));
    }

    std::error_code ec;
    fs::create_directories(cfg.output_dir, ec);
    if (ec) throw IoError("cannot create " + cfg.output_dir.string());
    write_report_csv((cfg.output_dir / "sweep.csv").string(), rows);
    return rows;
}

// ---------------------------------------------------------------------------
// Multi-split stability

namespace detail {

inline LoadedDataset subsample_split(const LoadedDataset& ds, std::uint64_t seed) {
    std::vector<std::string> contaminated, clean;
    for (const auto& c : ds.cases)
        (c.label == Label::Contaminated ? contaminated : clean).push_back(c.id);
    rng::Stream st(seed);
    auto pick_half = [&](std::vector<std::string>& ids) {
        for (std::size_t i = ids.size(); i > 1; --i)
            std::swap(ids[i - 1], ids[st.uniform_int(static_cast<std::int64_t>(i))]);
        ids.resize(std::max<std::size_t>(1, (ids.size() + 1) / 2));
    };
    pick_half(contaminated);
    pick_half(clean);
    std::set<std::string> keep(contaminated.begin(), contaminated.end());
    keep.insert(clean.begin(), clean.end());

    LoadedDataset out;
    out.condition = ds.condition;
    for (const auto& c : ds.cases)
        if (keep.count(c.id)) out.cases.push_back(c);
    if (ds.generations) {
        out.generations.emplace();
        for (const auto& r : *ds.generations)
            if (keep.count(r.prompt_id)) out.generations->push_back(r);
    }
    if (ds.logprobs) {
        out.logprobs.emplace();
        for (const auto& lp : *ds.logprobs)
            if (keep.count(lp.prompt_id)) out.logprobs->push_back(lp);
    }
    out.corpus = ds.corpus;
    return out;
}

}  // namespace detail

/// Mean +/- sample standard deviation per (condition, method) across
/// n_splits runs. With a simulation block each split regenerates the data
/// from a per-split seed (config seeds honored first); with file datasets
/// each split evaluates a seeded stratified half-subsample.
inline std::vector<SplitReport> run_splits(const ExperimentConfig& cfg, int n_splits) {
    if (n_splits < 2) throw Error("n_splits must be >= 2");

    std::vector<std::vector<MethodReport>> per_split;
    per_split.reserve(n_splits);

    std::optional<std::vector<LoadedDataset>> file_datasets;
    if (!cfg.simulation) file_datasets = materialize_datasets(cfg, /*write_files=*/false);

    for (int s = 0; s < n_splits; ++s) {
        const std::uint64_t seed = s < static_cast<int>(cfg.seeds.size())
                                       ? cfg.seeds[s]
                                       : rng::derive(cfg.simulation ? cfg.simulation->seed : 0,
                                                     {"split", std::to_string(s)});
        std::vector<LoadedDataset> datasets;
        if (cfg.simulation) {
            ExperimentConfig split_cfg = cfg;
            split_cfg.simulation->seed = seed;
            datasets = materialize_datasets(split_cfg, /*write_files=*/false);
        } else {
            for (const auto& ds : *file_datasets)
                datasets.push_back(detail::subsample_split(ds, seed));
        }
        per_split.push_back(audit_datasets(datasets, cfg).reports);
    }

    const auto& first = per_split.front();
    std::vector<SplitReport> out;
    for (std::size_t i = 0; i < first.size(); ++i) {
        auto stat = [&](auto field) {
            double mean = 0.0;
            for (const auto& split : per_split) mean += field(split[i]);
            mean /= static_cast<double>(n_splits);
            double var = 0.0;
            for (const auto& split : per_split) {
                const double d = field(split[i]) - mean;
                var += d * d;
            }
            return std::pair<double, double>(mean,
                                             std::sqrt(var / static_cast<double>(n_splits - 1)));
        };
        auto [am, as] = stat([](const MethodReport& r) { return r.accuracy; });
        auto [rm, rs] = stat([](const MethodReport& r) { return r.auroc; });
        auto [pm, ps] = stat([](const MethodReport& r) { return r.auprc; });
        out.push_back({first[i].condition, first[i].method, am, as, rm, rs, pm, ps});
    }

    std::error_code ec;
    fs::create_directories(cfg.output_dir, ec);
    if (ec) throw IoError("cannot create " + cfg.output_dir.string());
    write_splits_csv((cfg.output_dir / "splits.csv").string(), out);
    return out;
}

// ---------------------------------------------------------------------------
// Plots

namespace detail {

inline std::map<std::string, std::string> condition_attrs(const MethodReport& r) {
    std::map<std::string, std::string> attrs;
    attrs["condition"] = r.condition;
    attrs["method"] = to_string(r.method);
    for (const auto& part : split(r.condition, ';')) {
        auto eq = part.find('=');
        if (eq != std::string::npos && eq > 0)
            attrs[part.substr(0, eq)] = part.substr(eq + 1);
    }
    return attrs;
}

inline void sort_axis(std::vector<std::string>& values) {
    bool numeric = !values.empty();
    for (const auto& v : values) {
        try {
            parse_double(v);
        } catch (const Error&) {
            numeric = false;
            break;
        }
    }
    if (numeric)
        std::sort(values.begin(), values.end(),
                  [](const std::string& a, const std::string& b) {
                      return parse_double(a) < parse_double(b);
                  });
    else
        std::sort(values.begin(), values.end());
}

inline double report_metric(const MethodReport& r, const std::string& metric) {
    if (metric == "accuracy") return r.accuracy;
    if (metric == "auroc") return r.auroc;
    if (metric == "auprc") return r.auprc;
    if (metric == "threshold") return r.threshold;
    throw Error("unknown metric: " + metric);
}

}  // namespace detail

/// Accuracy heatmap over two condition-key axes. Every (row, col) cell must
/// be present exactly once; the color scale is anchored at 0.5 (chance) and
/// 1.0.
inline std::string render_heatmap(const std::vector<MethodReport>& reports,
                                  const std::string& row_key, const std::string& col_key,
                                  const std::string& metric = "accuracy") {
    std::vector<std::string> rows, cols;
    std::map<std::pair<std::string, std::string>, double> cells;
    for (const auto& r : reports) {
        auto attrs = detail::condition_attrs(r);
        auto ri = attrs.find(row_key);
        auto ci = attrs.find(col_key);
        if (ri == attrs.end() || ci == attrs.end()) continue;
        auto key = std::make_pair(ri->second, ci->second);
        if (cells.count(key))
            throw IncompleteGrid("duplicate cell " + row_key + "=" + key.first + ", " + col_key +
                                 "=" + key.second + " (filter by method first?)");
        cells[key] = detail::report_metric(r, metric);
        if (std::find(rows.begin(), rows.end(), key.first) == rows.end())
            rows.push_back(key.first);
        if (std::find(cols.begin(), cols.end(), key.second) == cols.end())
            cols.push_back(key.second);
    }
    if (cells.empty())
        throw IncompleteGrid("no report rows carry axes " + row_key + " and " + col_key);
    detail::sort_axis(rows);
    detail::sort_axis(cols);
    for (const auto& r : rows)
        for (const auto& c : cols)
            if (!cells.count({r, c}))
                throw IncompleteGrid("missing cell " + row_key + "=" + r + ", " + col_key + "=" +
                                     c);

    const double cell_w = 84, cell_h = 56, left = 120, top = 70, bottom = 30, right = 30;
    const double width = left + cell_w * static_cast<double>(cols.size()) + right;
    const double height = top + cell_h * static_cast<double>(rows.size()) + bottom;
    svg::Document doc(width, height);
    doc.text(left / 2.0, 28, 15, metric + " (chance = 0.50)", "start");
    const svg::Color low{239, 243, 255}, high{8, 48, 107};

    for (std::size_t ci = 0; ci < cols.size(); ++ci)
        doc.text(left + cell_w * (static_cast<double>(ci) + 0.5), top - 10, 12,
                 col_key + "=" + cols[ci]);
    for (std::size_t ri = 0; ri < rows.size(); ++ri)
        doc.text(left - 10, top + cell_h * (static_cast<double>(ri) + 0.5) + 4, 12,
                 row_key + "=" + rows[ri], "end");

    for (std::size_t ri = 0; ri < rows.size(); ++ri) {
        for (std::size_t ci = 0; ci < cols.size(); ++ci) {
            const double v = cells[{rows[ri], cols[ci]}];
            const double t = (v - 0.5) / 0.5;
            const double x = left + cell_w * static_cast<double>(ci);
            const double y = top + cell_h * static_cast<double>(ri);
            doc.rect(x, y, cell_w, cell_h, svg::lerp(low, high, t).hex(), 1.0, "#ffffff");
            doc.text(x + cell_w / 2.0, y + cell_h / 2.0 + 5, 14, svg::fmt(v), "middle",
                     t > 0.55 ? "#ffffff" : "#000000", "cell-value");
        }
    }
    return doc.finish();
}

/// Overlaid per-label peakedness histograms with annotated means.
inline std::string render_peakedness_histogram(const std::vector<ScoredPrompt>& scored,
                                               int bins = 20) {
    if (scored.empty()) throw EmptyInput("no CDD scores to plot");
    if (bins < 1) throw Error("bins must be >= 1");
    for (const auto& s : scored)
        if (s.method != Method::CDD) throw Error("peakedness histogram expects CDD scores");

    std::vector<long> contaminated(bins, 0), clean(bins, 0);
    double sum_c = 0.0, sum_cl = 0.0;
    long n_c = 0, n_cl = 0;
    for (const auto& s : scored) {
        int bin = static_cast<int>(s.score * bins);
        bin = std::clamp(bin, 0, bins - 1);
        if (s.label == Label::Contaminated) {
            ++contaminated[bin];
            sum_c += s.score;
            ++n_c;
        } else {
            ++clean[bin];
            sum_cl += s.score;
            ++n_cl;
        }
    }
    long max_count = 1;
    for (int b = 0; b < bins; ++b)
        max_count = std::max({max_count, contaminated[b], clean[b]});

    const double left = 60, top = 50, plot_w = 480, plot_h = 240, bottom = 40;
    svg::Document doc(left + plot_w + 30, top + plot_h + bottom);
    doc.text(left, 24, 15, "peakedness distribution", "start");

    char buf[96];
    if (n_cl > 0) {
        std::snprintf(buf, sizeof buf, "clean: mean %.3f (n=%ld)",
                      sum_cl / static_cast<double>(n_cl), n_cl);
        doc.text(left + plot_w, 24, 12, buf, "end", "#1f77b4");
    }
    if (n_c > 0) {
        std::snprintf(buf, sizeof buf, "contaminated: mean %.3f (n=%ld)",
                      sum_c / static_cast<double>(n_c), n_c);
        doc.text(left + plot_w, 40, 12, buf, "end", "#d62728");
    }

    const double bin_w = plot_w / static_cast<double>(bins);
    auto bar = [&](int b, long count, const char* color) {
        if (count == 0) return;
        const double h = plot_h * static_cast<double>(count) / static_cast<double>(max_count);
        doc.rect(left + bin_w * b, top + plot_h - h, bin_w, h, color, 0.55);
    };
    for (int b = 0; b < bins; ++b) {
        bar(b, clean[b], "#1f77b4");
        bar(b, contaminated[b], "#d62728");
    }

    doc.line(left, top + plot_h, left + plot_w, top + plot_h);
    doc.line(left, top, left, top + plot_h);
    for (double tick : {0.0, 0.5, 1.0}) {
        const double x = left + plot_w * tick;
        doc.line(x, top + plot_h, x, top + plot_h + 5);
        doc.text(x, top + plot_h + 20, 11, fmt_double(tick));
    }
    std::snprintf(buf, sizeof buf, "%ld", max_count);
    doc.text(left - 8, top + 4, 11, buf, "end");
    doc.text(left - 8, top + plot_h + 4, 11, "0", "end");
    return doc.finish();
}

}  // namespace contam
