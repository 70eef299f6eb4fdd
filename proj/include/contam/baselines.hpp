#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "contam/core.hpp"
#include "contam/errors.hpp"

namespace contam {

/// exp of the mean negative per-token log-probability, over scored tokens
/// only. Low perplexity flags familiarity (orientation LowerMeansContaminated).
inline double perplexity(const PromptLogProbs& lp) {
    double sum = 0.0;
    long count = 0;
    for (const auto& v : lp.logprobs)
        if (v) {
            sum += *v;
            ++count;
        }
    if (count == 0) throw NoScoredTokens("prompt " + lp.prompt_id + " has no scored tokens");
    return std::exp(-sum / static_cast<double>(count));
}

/// Mean log-probability of the k% lowest-probability scored tokens
/// (ceil(k/100 * count) of them, never zero). High values flag contamination.
inline double min_k_prob(const PromptLogProbs& lp, double k_percent) {
    if (!(k_percent > 0.0 && k_percent <= 100.0)) throw Error("k_percent must be in (0, 100]");
    std::vector<double> present;
    present.reserve(lp.logprobs.size());
    for (const auto& v : lp.logprobs)
        if (v) present.push_back(*v);
    if (present.empty()) throw NoScoredTokens("prompt " + lp.prompt_id + " has no scored tokens");
    std::sort(present.begin(), present.end());
    auto take = static_cast<std::size_t>(
        std::ceil(k_percent / 100.0 * static_cast<double>(present.size())));
    take = std::clamp<std::size_t>(take, 1, present.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < take; ++i) sum += present[i];
    return sum / static_cast<double>(take);
}

// ---------------------------------------------------------------------------
// N-gram corpus overlap

/// Exact membership set over the corpus's contiguous n-grams. Units are
/// whitespace-delimited words of the raw text (case and punctuation
/// preserved); token-id units are available for corpora of token sequences.
struct NGramIndex {
    int n = 3;
    std::unordered_set<std::string> members;

    std::size_t size() const { return members.size(); }
};

namespace detail {

// Words cannot contain whitespace, so 0x1F joins them bijectively.
inline std::string ngram_key(const std::vector<std::string>& units, std::size_t start, int n) {
    std::string key;
    for (int k = 0; k < n; ++k) {
        if (k) key.push_back('\x1f');
        key += units[start + k];
    }
    return key;
}

inline void insert_ngrams(NGramIndex& index, const std::vector<std::string>& units) {
    if (units.size() < static_cast<std::size_t>(index.n)) return;
    for (std::size_t i = 0; i + index.n <= units.size(); ++i)
        index.members.insert(ngram_key(units, i, index.n));
}

}  // namespace detail

inline NGramIndex build_ngram_index(const std::vector<std::string>& corpus, int n) {
    if (n < 1) throw Error("ngram n must be >= 1");
    NGramIndex index;
    index.n = n;
    for (const auto& doc : corpus) detail::insert_ngrams(index, whitespace_words(doc));
    return index;
}

/// Token-id variant for corpora that are already token sequences.
inline NGramIndex build_ngram_index_tokens(const std::vector<TokenSequence>& corpus, int n) {
    if (n < 1) throw Error("ngram n must be >= 1");
    NGramIndex index;
    index.n = n;
    for (const auto& seq : corpus) {
        std::vector<std::string> units;
        units.reserve(seq.size());
        for (Token t : seq.tokens) units.push_back(std::to_string(t));
        detail::insert_ngrams(index, units);
    }
    return index;
}

/// Fraction of the prompt's n-gram positions present in the index.
inline double ngram_overlap(const PromptCase& prompt, const NGramIndex& index) {
    const auto units = whitespace_words(prompt.prompt_text);
    if (units.size() < static_cast<std::size_t>(index.n))
        throw PromptTooShort("prompt " + prompt.id + " is shorter than " +
                             std::to_string(index.n) + " units");
    const std::size_t total = units.size() - index.n + 1;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < total; ++i)
        if (index.members.count(detail::ngram_key(units, i, index.n))) ++hits;
    return static_cast<double>(hits) / static_cast<double>(total);
}

// ---------------------------------------------------------------------------
// Dataset-level scoring

namespace detail {

inline std::unordered_map<std::string, Label> label_map(const std::vector<PromptCase>& cases) {
    std::unordered_map<std::string, Label> labels;
    labels.reserve(cases.size());
    for (const auto& c : cases) labels.emplace(c.id, c.label);
    return labels;
}

}  // namespace detail

inline std::vector<ScoredPrompt> score_perplexity(const std::vector<PromptLogProbs>& lps,
                                                  const std::vector<PromptCase>& cases) {
    auto labels = detail::label_map(cases);
    std::vector<ScoredPrompt> scored;
    scored.reserve(lps.size());
    for (const auto& lp : lps) {
        auto it = labels.find(lp.prompt_id);
        if (it == labels.end()) throw MissingCase(lp.prompt_id);
        scored.push_back({lp.prompt_id, it->second, Method::Perplexity, perplexity(lp),
                          Orientation::LowerMeansContaminated});
    }
    return scored;
}

inline std::vector<ScoredPrompt> score_min_k(const std::vector<PromptLogProbs>& lps,
                                             const std::vector<PromptCase>& cases,
                                             double k_percent) {
    auto labels = detail::label_map(cases);
    std::vector<ScoredPrompt> scored;
    scored.reserve(lps.size());
    for (const auto& lp : lps) {
        auto it = labels.find(lp.prompt_id);
        if (it == labels.end()) throw MissingCase(lp.prompt_id);
        scored.push_back({lp.prompt_id, it->second, Method::MinKProb, min_k_prob(lp, k_percent),
                          Orientation::HigherMeansContaminated});
    }
    return scored;
}

/// Prompts shorter than n units cannot form an n-gram; they are scored 0 and
/// reported through `flagged` rather than aborting the batch.
inline std::vector<ScoredPrompt> score_ngram(const std::vector<PromptCase>& cases,
                                             const NGramIndex& index,
                                             std::vector<std::string>* flagged = nullptr) {
    std::vector<ScoredPrompt> scored;
    scored.reserve(cases.size());
    for (const auto& c : cases) {
        double overlap = 0.0;
        try {
            overlap = ngram_overlap(c, index);
        } catch (const PromptTooShort&) {
            if (flagged) flagged->push_back(c.id);
        }
        scored.push_back({c.id, c.label, Method::NGram, overlap,
                          Orientation::HigherMeansContaminated});
    }
    return scored;
}

}  // namespace contam
