// contam — contamination-detection toolkit CLI.
//
// Pipeline subcommands read and write only the documented files
// (prompts/generations/logprobs/corpus JSONL, scores/report CSV, SVG plots),
// so stages compose: simulate|sample -> score -> calibrate/evaluate -> report.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "contam/baselines.hpp"
#include "contam/cdd.hpp"
#include "contam/core.hpp"
#include "contam/harness.hpp"
#include "contam/metrics.hpp"
#include "contam/sampler.hpp"
#include "contam/simulator.hpp"

namespace fs = std::filesystem;
using namespace contam;

namespace {

std::vector<std::string> harness_split(const std::string& csv) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= csv.size(); ++i) {
        if (i == csv.size() || csv[i] == ',') {
            if (i > start) parts.push_back(csv.substr(start, i - start));
            start = i + 1;
        }
    }
    return parts;
}

int cmd_simulate(const std::string& config_path, const std::string& out_dir) {
    BenchmarkSpec spec = load_benchmark_spec(config_path);
    auto dirs = make_benchmark(spec, out_dir);
    for (const auto& d : dirs) std::cout << d.string() << '\n';
    return 0;
}

struct SampleArgs {
    std::string prompts;
    std::string out_dir = "sampled";
    std::string collect = "both";
    EndpointConfig endpoint;
    CddParams params;
    std::string api_key_env = "CONTAM_API_KEY";
};

int cmd_sample(SampleArgs& args) {
    if (const char* key = std::getenv(args.api_key_env.c_str()); key && *key)
        args.endpoint.api_key = std::string(key);
    args.endpoint.max_tokens = args.params.l_max;

    auto cases = load_prompt_cases(args.prompts);
    fs::create_directories(args.out_dir);
    std::vector<FailureEntry> failures;

    if (args.collect == "both" || args.collect == "generations") {
        auto batch = collect_generations_batch(args.endpoint, cases, args.params);
        save_generations((fs::path(args.out_dir) / "generations.jsonl").string(), batch.records);
        failures.insert(failures.end(), batch.failures.begin(), batch.failures.end());
        std::cout << "generations: " << batch.records.size() << " records, "
                  << batch.failures.size() << " failures\n";
    }
    if (args.collect == "both" || args.collect == "logprobs") {
        auto batch = fetch_logprobs_batch(args.endpoint, cases);
        save_logprobs((fs::path(args.out_dir) / "logprobs.jsonl").string(), batch.records);
        failures.insert(failures.end(), batch.failures.begin(), batch.failures.end());
        std::cout << "logprobs: " << batch.records.size() << " records, "
                  << batch.failures.size() << " failures\n";
    }
    save_failures((fs::path(args.out_dir) / "failures.jsonl").string(), failures);
    return failures.empty() ? 0 : 2;
}

struct ScoreArgs {
    std::string prompts, generations, logprobs, corpus;
    std::string methods = "cdd";
    std::string out = "scores.csv";
    CddParams params;
    double k_percent = 20.0;
    int ngram_n = 3;
};

int cmd_score(const ScoreArgs& args) {
    LoadedDataset ds;
    ds.condition = "cli";
    ds.cases = load_prompt_cases(args.prompts);
    if (!args.generations.empty()) ds.generations = load_generations(args.generations);
    if (!args.logprobs.empty()) ds.logprobs = load_logprobs(args.logprobs);
    if (!args.corpus.empty()) ds.corpus = load_corpus(args.corpus);

    ExperimentConfig cfg;
    cfg.cdd_params = args.params;
    cfg.k_percent = args.k_percent;
    cfg.ngram_n = args.ngram_n;

    std::vector<ScoredPrompt> all;
    std::vector<std::string> flagged;
    for (const auto& name : harness_split(args.methods)) {
        auto scored = score_method(ds, parse_method(name), cfg, &flagged);
        all.insert(all.end(), scored.begin(), scored.end());
    }
    write_scores_csv(args.out, all);
    for (const auto& id : flagged)
        std::cerr << "warning: prompt " << id << " too short for n-grams, scored 0\n";
    std::cout << args.out << ": " << all.size() << " rows\n";
    return 0;
}

int cmd_calibrate(const std::string& scores_path, const std::string& method_name, bool as_json) {
    auto scored = load_scores_csv(scores_path);
    const Method method = parse_method(method_name);
    std::vector<ScoredPrompt> filtered;
    for (const auto& s : scored)
        if (s.method == method) filtered.push_back(s);
    if (filtered.empty()) throw Error("no rows for method " + method_name + " in " + scores_path);
    CalibrationResult r = youden_calibrate(filtered);
    if (as_json) {
        json j = {{"method", method_name},      {"threshold", r.threshold},
                  {"youden_j", r.youden_j},     {"sensitivity", r.sensitivity},
                  {"specificity", r.specificity}, {"accuracy", r.accuracy}};
        std::cout << j.dump(2) << '\n';
    } else {
        std::cout << "method       " << method_name << '\n'
                  << "threshold    " << fmt_double(r.threshold) << '\n'
                  << "youden_j     " << fmt_double(r.youden_j) << '\n'
                  << "sensitivity  " << fmt_double(r.sensitivity) << '\n'
                  << "specificity  " << fmt_double(r.specificity) << '\n'
                  << "accuracy     " << fmt_double(r.accuracy) << '\n';
    }
    return 0;
}

int cmd_evaluate(const std::string& config_path) {
    ExperimentConfig cfg = load_experiment_config(config_path);
    AuditResult result = run_audit(cfg);
    for (const auto& r : result.reports)
        std::cout << r.condition << "  " << to_string(r.method) << "  acc=" << fmt_double(r.accuracy)
                  << "  auroc=" << fmt_double(r.auroc) << "  auprc=" << fmt_double(r.auprc)
                  << '\n';
    std::vector<ScoredPrompt> cdd_scores;
    for (const auto& s : result.scores)
        if (s.method == Method::CDD) cdd_scores.push_back(s);
    if (!cdd_scores.empty()) {
        auto out = detail::open_out((cfg.output_dir / "peakedness.svg").string());
        out << render_peakedness_histogram(cdd_scores);
    }
    std::cout << "wrote " << (cfg.output_dir / "report.csv").string() << '\n';
    return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& preset) {
    ExperimentConfig cfg = load_experiment_config(config_path);
    if (preset == "paper-table4")
        cfg.sweep = paper_table4_sweep();
    else if (!preset.empty())
        throw Error("unknown preset: " + preset);
    auto rows = run_sweep(cfg);
    std::cout << "wrote " << (cfg.output_dir / "sweep.csv").string() << " (" << rows.size()
              << " rows)\n";
    return 0;
}

int cmd_splits(const std::string& config_path, int n_splits) {
    ExperimentConfig cfg = load_experiment_config(config_path);
    auto rows = run_splits(cfg, n_splits);
    for (const auto& r : rows)
        std::cout << r.condition << "  " << to_string(r.method) << "  acc=" << fmt_double(r.accuracy_mean)
                  << " +/- " << fmt_double(r.accuracy_std) << '\n';
    std::cout << "wrote " << (cfg.output_dir / "splits.csv").string() << '\n';
    return 0;
}

struct ReportArgs {
    std::string report_csv, heatmap_out = "heatmap.svg";
    std::string rows = "kappa", cols = "level", metric = "accuracy", method = "cdd";
    std::string scores_csv, histogram_out = "peakedness.svg";
    int bins = 20;
};

int cmd_report(const ReportArgs& args) {
    if (!args.report_csv.empty()) {
        if (args.heatmap_out.empty()) throw Error("--heatmap output path required with --report");
        auto reports = load_report_csv(args.report_csv);
        std::vector<MethodReport> filtered;
        const Method method = parse_method(args.method);
        for (const auto& r : reports)
            if (r.method == method) filtered.push_back(r);
        auto out = detail::open_out(args.heatmap_out);
        out << render_heatmap(filtered, args.rows, args.cols, args.metric);
        std::cout << "wrote " << args.heatmap_out << '\n';
    }
    if (!args.scores_csv.empty()) {
        if (args.histogram_out.empty())
            throw Error("--histogram output path required with --scores");
        auto scored = load_scores_csv(args.scores_csv);
        std::vector<ScoredPrompt> cdd_scores;
        for (const auto& s : scored)
            if (s.method == Method::CDD) cdd_scores.push_back(s);
        auto out = detail::open_out(args.histogram_out);
        out << render_peakedness_histogram(cdd_scores, args.bins);
        std::cout << "wrote " << args.histogram_out << '\n';
    }
    if (args.report_csv.empty() && args.scores_csv.empty())
        throw Error("nothing to render: pass --report and/or --scores");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"contamination-detection toolkit"};
    app.require_subcommand(1);

    // simulate
    std::string sim_config, sim_out = "data";
    auto* simulate = app.add_subcommand("simulate", "generate synthetic benchmark datasets");
    simulate->add_option("--config", sim_config, "grid config (JSON)")->required();
    simulate->add_option("--out", sim_out, "output directory");

    // sample
    SampleArgs sample_args;
    auto* sample = app.add_subcommand("sample", "collect generations/logprobs from an endpoint");
    sample->add_option("--prompts", sample_args.prompts, "prompts.jsonl")->required();
    sample->add_option("--base-url", sample_args.endpoint.base_url,
                       "endpoint base URL, e.g. http://host:8000/v1")->required();
    sample->add_option("--model", sample_args.endpoint.model_name, "model name")->required();
    sample->add_option("--api-key-env", sample_args.api_key_env,
                       "environment variable holding the API key");
    sample->add_option("--collect", sample_args.collect, "both|generations|logprobs")
        ->check(CLI::IsMember({"both", "generations", "logprobs"}));
    sample->add_option("--n", sample_args.params.n, "temperature samples per prompt");
    sample->add_option("--temperature", sample_args.params.sample_temperature,
                       "sampling temperature");
    sample->add_option("--l-max", sample_args.params.l_max, "sequence truncation length");
    sample->add_option("--concurrency", sample_args.endpoint.max_concurrent_requests,
                       "max in-flight requests");
    sample->add_option("--retries", sample_args.endpoint.max_retries, "retries per request");
    sample->add_option("--timeout-ms", sample_args.endpoint.request_timeout_ms,
                       "request timeout (ms)");
    sample->add_option("--backoff-ms", sample_args.endpoint.retry_backoff_ms,
                       "initial retry backoff (ms)");
    sample->add_flag_callback(
        "--single-completion",
        [&] { sample_args.endpoint.multi_completion = false; },
        "issue n single-completion requests instead of one n-completion request");
    sample->add_option("--out", sample_args.out_dir, "output directory");

    // score
    ScoreArgs score_args;
    auto* score = app.add_subcommand("score", "score prompts with the selected detectors");
    score->add_option("--prompts", score_args.prompts, "prompts.jsonl")->required();
    score->add_option("--generations", score_args.generations, "generations.jsonl (cdd)");
    score->add_option("--logprobs", score_args.logprobs, "logprobs.jsonl (perplexity/minkprob)");
    score->add_option("--corpus", score_args.corpus, "corpus.jsonl (ngram)");
    score->add_option("--methods", score_args.methods, "comma list: cdd,perplexity,minkprob,ngram");
    score->add_option("--alpha", score_args.params.alpha, "CDD similarity threshold");
    score->add_option("--k-percent", score_args.k_percent, "Min-k%% fraction");
    score->add_option("--ngram-n", score_args.ngram_n, "n-gram size");
    score->add_option("--out", score_args.out, "scores.csv path");

    // calibrate
    std::string cal_scores, cal_method = "cdd";
    bool cal_json = false;
    auto* calibrate = app.add_subcommand("calibrate", "Youden-calibrate a method's scores");
    calibrate->add_option("--scores", cal_scores, "scores.csv")->required();
    calibrate->add_option("--method", cal_method, "method to calibrate");
    calibrate->add_flag("--json", cal_json, "emit JSON");

    // evaluate
    std::string eval_config;
    auto* evaluate = app.add_subcommand("evaluate", "run a full audit from a config file");
    evaluate->add_option("--config", eval_config, "experiment config (JSON)")->required();

    // sweep
    std::string sweep_config, sweep_preset;
    auto* sweep = app.add_subcommand("sweep", "CDD hyperparameter sweep");
    sweep->add_option("--config", sweep_config, "experiment config (JSON)")->required();
    sweep->add_option("--preset", sweep_preset, "axis preset: paper-table4");

    // splits
    std::string splits_config;
    int n_splits = 9;
    auto* splits = app.add_subcommand("splits", "multi-split stability report");
    splits->add_option("--config", splits_config, "experiment config (JSON)")->required();
    splits->add_option("--n-splits", n_splits, "number of splits (>= 2)");

    // report
    ReportArgs report_args;
    auto* report = app.add_subcommand("report", "render SVG plots from CSV outputs");
    report->add_option("--report", report_args.report_csv, "report.csv for the heatmap");
    report->add_option("--heatmap", report_args.heatmap_out, "heatmap SVG output path");
    report->add_option("--rows", report_args.rows, "heatmap row axis key");
    report->add_option("--cols", report_args.cols, "heatmap column axis key");
    report->add_option("--metric", report_args.metric, "accuracy|auroc|auprc|threshold");
    report->add_option("--method", report_args.method, "method filter for the heatmap");
    report->add_option("--scores", report_args.scores_csv, "scores.csv for the histogram");
    report->add_option("--histogram", report_args.histogram_out, "histogram SVG output path");
    report->add_option("--bins", report_args.bins, "histogram bin count");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*simulate) return cmd_simulate(sim_config, sim_out);
        if (*sample) return cmd_sample(sample_args);
        if (*score) return cmd_score(score_args);
        if (*calibrate) return cmd_calibrate(cal_scores, cal_method, cal_json);
        if (*evaluate) return cmd_evaluate(eval_config);
        if (*sweep) return cmd_sweep(sweep_config, sweep_preset);
        if (*splits) return cmd_splits(splits_config, n_splits);
        if (*report) return cmd_report(report_args);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
