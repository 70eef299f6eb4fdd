#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "contam/core.hpp"
#include "contam/errors.hpp"

namespace contam {

struct CalibrationResult {
    double threshold = 0.0;
    double youden_j = 0.0;     // sensitivity + specificity - 1
    double sensitivity = 0.0;
    double specificity = 0.0;
    double accuracy = 0.0;
};

namespace detail {

// Flips Lower-oriented scores so that higher always means contaminated.
inline double oriented_value(double score, Orientation o) {
    return o == Orientation::HigherMeansContaminated ? score : -score;
}

struct ScoreSet {
    std::vector<double> oriented;   // aligned with positive[]
    std::vector<bool> positive;     // label == Contaminated
    Orientation orientation = Orientation::HigherMeansContaminated;
    long pos = 0, neg = 0;
};

inline ScoreSet oriented_scores(const std::vector<ScoredPrompt>& scored) {
    if (scored.empty()) throw EmptyInput("no scored prompts");
    ScoreSet set;
    set.orientation = scored.front().orientation;
    const Method method = scored.front().method;
    set.oriented.reserve(scored.size());
    set.positive.reserve(scored.size());
    for (const auto& s : scored) {
        if (s.method != method || s.orientation != set.orientation)
            throw Error("scored prompts mix methods or orientations");
        set.oriented.push_back(oriented_value(s.score, s.orientation));
        const bool p = s.label == Label::Contaminated;
        set.positive.push_back(p);
        (p ? set.pos : set.neg)++;
    }
    return set;
}

struct ConfusionRates {
    double sensitivity, specificity, accuracy;
};

// Predicted contaminated iff oriented score > oriented threshold (strict).
inline ConfusionRates rates_at_oriented(const ScoreSet& set, double oriented_threshold) {
    long tp = 0, tn = 0;
    for (std::size_t i = 0; i < set.oriented.size(); ++i) {
        const bool predicted = set.oriented[i] > oriented_threshold;
        if (set.positive[i] && predicted) ++tp;
        if (!set.positive[i] && !predicted) ++tn;
    }
    return {static_cast<double>(tp) / static_cast<double>(set.pos),
            static_cast<double>(tn) / static_cast<double>(set.neg),
            static_cast<double>(tp + tn) / static_cast<double>(set.oriented.size())};
}

}  // namespace detail

/// Threshold maximizing the Youden index J = sensitivity + specificity - 1,
/// scanned over midpoints between consecutive distinct scores plus sentinels
/// below the minimum and above the maximum. Ties on J break toward higher
/// accuracy, then toward the smallest threshold (in raw score space).
inline CalibrationResult youden_calibrate(const std::vector<ScoredPrompt>& scored) {
    auto set = detail::oriented_scores(scored);
    if (set.pos == 0 || set.neg == 0)
        throw SingleClassInput("calibration needs at least one prompt of each label");

    std::vector<double> values = set.oriented;
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());

    std::vector<double> candidates;
    candidates.reserve(values.size() + 1);
    candidates.push_back(values.front() - 1.0);
    for (std::size_t i = 0; i + 1 < values.size(); ++i)
        candidates.push_back(values[i] + (values[i + 1] - values[i]) / 2.0);
    candidates.push_back(values.back() + 1.0);

    bool have = false;
    CalibrationResult best;
    for (double cand : candidates) {
        const auto r = detail::rates_at_oriented(set, cand);
        const double j = r.sensitivity + r.specificity - 1.0;
        const double raw = set.orientation == Orientation::HigherMeansContaminated ? cand : -cand;
        const bool better =
            !have || j > best.youden_j ||
            (j == best.youden_j &&
             (r.accuracy > best.accuracy || (r.accuracy == best.accuracy && raw < best.threshold)));
        if (better) {
            best = {raw, j, r.sensitivity, r.specificity, r.accuracy};
            have = true;
        }
    }
    return best;
}

/// Fraction classified correctly at the given raw threshold. The comparison
/// is strict on the contaminated side: score > t for higher-oriented methods,
/// score < t for perplexity.
inline double accuracy_at(const std::vector<ScoredPrompt>& scored, double threshold) {
    auto set = detail::oriented_scores(scored);
    const double oriented =
        set.orientation == Orientation::HigherMeansContaminated ? threshold : -threshold;
    return detail::rates_at_oriented(set, oriented).accuracy;
}

/// Rank-based (Mann-Whitney) AUROC with average ranks for ties; 1.0 means
/// every contaminated prompt outranks every clean one.
inline double auroc(const std::vector<ScoredPrompt>& scored) {
    auto set = detail::oriented_scores(scored);
    if (set.pos == 0 || set.neg == 0)
        throw SingleClassInput("auroc needs at least one prompt of each label");

    std::vector<std::size_t> order(set.oriented.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return set.oriented[a] < set.oriented[b]; });

    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j < order.size() && set.oriented[order[j]] == set.oriented[order[i]]) ++j;
        // ranks i+1 .. j averaged across the tie run
        const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (std::size_t k = i; k < j; ++k)
            if (set.positive[order[k]]) rank_sum_pos += avg_rank;
        i = j;
    }
    const double p = static_cast<double>(set.pos), n = static_cast<double>(set.neg);
    return (rank_sum_pos - p * (p + 1.0) / 2.0) / (p * n);
}

/// Average precision over score-descending cuts, each tie group processed as
/// a single cut: AP = sum over groups of (recall gain * precision at cut).
inline double auprc(const std::vector<ScoredPrompt>& scored) {
    auto set = detail::oriented_scores(scored);
    if (set.pos == 0) throw NoPositives("auprc needs at least one contaminated prompt");

    std::vector<std::size_t> order(set.oriented.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return set.oriented[a] > set.oriented[b]; });

    double ap = 0.0;
    long tp = 0;
    std::size_t covered = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        long group_pos = 0;
        while (j < order.size() && set.oriented[order[j]] == set.oriented[order[i]]) {
            if (set.positive[order[j]]) ++group_pos;
            ++j;
        }
        tp += group_pos;
        covered = j;
        if (group_pos > 0) {
            const double precision = static_cast<double>(tp) / static_cast<double>(covered);
            const double recall_gain =
                static_cast<double>(group_pos) / static_cast<double>(set.pos);
            ap += recall_gain * precision;
        }
        i = j;
    }
    // summation can drift a few ulps past 1 on perfectly separated input
    return std::min(ap, 1.0);
}

}  // namespace contam
