#pragma once

#include <cmath>
#include <string>
#include <unordered_map>
#include <vector>

#include "contam/core.hpp"
#include "contam/editdist.hpp"
#include "contam/errors.hpp"

namespace contam {

struct CddParams {
    double alpha = 0.05;             // similarity threshold in (0, 1]
    double xi = 0.01;                // decision threshold in [0, 1)
    int n = 50;                      // temperature samples per prompt
    int l_max = 100;                 // truncation length
    double sample_temperature = 0.8;

    void validate() const {
        if (!(alpha > 0.0 && alpha <= 1.0)) throw Error("alpha must be in (0, 1]");
        if (!(xi >= 0.0 && xi < 1.0)) throw Error("xi must be in [0, 1)");
        if (n < 1) throw Error("n must be >= 1");
        if (l_max < 1) throw Error("l_max must be >= 1");
        if (!(sample_temperature > 0.0)) throw Error("sample_temperature must be > 0");
    }
};

/// Fraction of temperature samples within alpha*l token edits of the greedy
/// reference, where l is the maximum sequence length across the samples and
/// the greedy output. The integer distance is compared against the
/// real-valued product alpha*l without rounding; since distances are
/// integers, d <= alpha*l is equivalent to d <= floor(alpha*l), which is the
/// band the inner loop runs with. Degenerate case: a record whose sequences
/// are all empty has l = 0, every distance is 0 <= 0, and peakedness is 1.
inline double peakedness(const GenerationRecord& record, double alpha) {
    if (record.samples.empty()) throw EmptySamples("record " + record.prompt_id + " has no samples");
    std::size_t l = record.greedy.size();
    for (const auto& s : record.samples) l = std::max(l, s.size());
    const double limit = alpha * static_cast<double>(l);
    const EditBudget budget{static_cast<int>(std::floor(limit))};

    int close = 0;
    for (const auto& s : record.samples)
        if (levenshtein_within(s, record.greedy, budget)) ++close;
    return static_cast<double>(close) / static_cast<double>(record.samples.size());
}

/// A prompt is flagged as contaminated when its peakedness strictly exceeds xi.
inline Label classify(double peak, double xi) {
    if (!(peak >= 0.0 && peak <= 1.0)) throw Error("peakedness must be in [0, 1]");
    return peak > xi ? Label::Contaminated : Label::Clean;
}

/// Raw peakedness scores for a whole dataset, one ScoredPrompt per record in
/// input order. Threshold selection (fixed xi or Youden) happens downstream.
inline std::vector<ScoredPrompt> score_dataset(const std::vector<GenerationRecord>& records,
                                               const std::vector<PromptCase>& cases,
                                               const CddParams& params) {
    params.validate();
    std::unordered_map<std::string, Label> labels;
    labels.reserve(cases.size());
    for (const auto& c : cases) labels.emplace(c.id, c.label);

    std::vector<ScoredPrompt> scored;
    scored.reserve(records.size());
    for (const auto& r : records) {
        auto it = labels.find(r.prompt_id);
        if (it == labels.end()) throw MissingCase(r.prompt_id);
        scored.push_back({r.prompt_id, it->second, Method::CDD, peakedness(r, params.alpha),
                          Orientation::HigherMeansContaminated});
    }
    return scored;
}

}  // namespace contam
