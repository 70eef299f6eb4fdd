#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "contam/errors.hpp"

namespace contam {

using json = nlohmann::json;

/// Opaque token identifier. The toolkit never tokenizes model text itself;
/// ids come from the audited model's tokenizer or from the documented
/// whitespace-unit fallback (text_to_units).
using Token = std::int64_t;

struct TokenSequence {
    std::vector<Token> tokens;

    std::size_t size() const { return tokens.size(); }
    bool empty() const { return tokens.empty(); }
    bool operator==(const TokenSequence&) const = default;
};

enum class Label { Contaminated, Clean };
enum class Method { CDD, Perplexity, MinKProb, NGram };
enum class Orientation { HigherMeansContaminated, LowerMeansContaminated };

/// Score direction is fixed per method: only perplexity flags low values.
inline Orientation orientation_of(Method m) {
    return m == Method::Perplexity ? Orientation::LowerMeansContaminated
                                   : Orientation::HigherMeansContaminated;
}

inline const char* to_string(Label l) {
    return l == Label::Contaminated ? "contaminated" : "clean";
}

inline const char* to_string(Method m) {
    switch (m) {
        case Method::CDD: return "cdd";
        case Method::Perplexity: return "perplexity";
        case Method::MinKProb: return "minkprob";
        case Method::NGram: return "ngram";
    }
    return "?";
}

inline Label parse_label(const std::string& s) {
    if (s == "contaminated") return Label::Contaminated;
    if (s == "clean") return Label::Clean;
    throw Error("unknown label: " + s);
}

inline Method parse_method(const std::string& s) {
    if (s == "cdd") return Method::CDD;
    if (s == "perplexity") return Method::Perplexity;
    if (s == "minkprob") return Method::MinKProb;
    if (s == "ngram") return Method::NGram;
    throw Error("unknown method: " + s);
}

/// All methods, in the fixed order used for reports.
inline const std::vector<Method>& all_methods() {
    static const std::vector<Method> ms = {Method::CDD, Method::Perplexity, Method::MinKProb,
                                           Method::NGram};
    return ms;
}

struct PromptCase {
    std::string id;
    std::string prompt_text;
    TokenSequence prompt_tokens;
    Label label = Label::Clean;
    std::optional<std::string> reference_text;

    bool operator==(const PromptCase&) const = default;
};

struct GenerationRecord {
    std::string prompt_id;
    TokenSequence greedy;
    std::vector<TokenSequence> samples;
    double greedy_temperature = 0.0;
    double sample_temperature = 0.8;
    int n = 0;  // == samples.size()

    bool operator==(const GenerationRecord&) const = default;
};

/// Per-token natural-log probabilities of a prompt. A missing entry marks a
/// token the endpoint could not score (typically the first); it is kept in
/// place so token counts stay aligned, and excluded from all aggregation.
struct PromptLogProbs {
    std::string prompt_id;
    TokenSequence tokens;
    std::vector<std::optional<double>> logprobs;

    bool operator==(const PromptLogProbs&) const = default;
};

struct ScoredPrompt {
    std::string prompt_id;
    Label label = Label::Clean;
    Method method = Method::CDD;
    double score = 0.0;
    Orientation orientation = Orientation::HigherMeansContaminated;

    bool operator==(const ScoredPrompt&) const = default;
};

// ---------------------------------------------------------------------------
// Token utilities

inline TokenSequence truncate(const TokenSequence& seq, int l_max) {
    if (l_max < 1) throw Error("l_max must be >= 1");
    if (seq.size() <= static_cast<std::size_t>(l_max)) return seq;
    return TokenSequence{{seq.tokens.begin(), seq.tokens.begin() + l_max}};
}

inline std::vector<std::string> whitespace_words(const std::string& text) {
    std::vector<std::string> words;
    std::size_t i = 0;
    const std::size_t n = text.size();
    while (i < n) {
        while (i < n && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        std::size_t start = i;
        while (i < n && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        if (i > start) words.emplace_back(text.substr(start, i - start));
    }
    return words;
}

/// Stable 63-bit FNV-1a hash of a word, used as its fallback unit id.
inline Token unit_id(const std::string& word) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : word) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return static_cast<Token>(h & 0x7fffffffffffffffull);
}

/// Whitespace-word fallback for text without model token ids. An
/// approximation of the model's tokenizer, documented as such; unit ids are
/// only ever compared to other unit ids.
inline TokenSequence text_to_units(const std::string& text) {
    TokenSequence seq;
    for (const auto& w : whitespace_words(text)) seq.tokens.push_back(unit_id(w));
    return seq;
}

// ---------------------------------------------------------------------------
// Contamination injection (§ training-corpus construction)

/// Training documents followed by `level` copies of the contamination set.
/// A document is the full prompt-answer pair; prompt and reference are joined
/// with a single space so every prompt n-gram survives intact.
inline std::vector<std::string> build_contaminated_corpus(const std::vector<PromptCase>& train,
                                                          const std::vector<PromptCase>& contam,
                                                          int level) {
    if (level < 0) throw Error("contamination level must be >= 0");
    auto document = [](const PromptCase& c) {
        if (c.reference_text && !c.reference_text->empty())
            return c.prompt_text + " " + *c.reference_text;
        return c.prompt_text;
    };
    std::vector<std::string> docs;
    docs.reserve(train.size() + static_cast<std::size_t>(level) * contam.size());
    for (const auto& c : train) docs.push_back(document(c));
    for (int rep = 0; rep < level; ++rep)
        for (const auto& c : contam) docs.push_back(document(c));
    return docs;
}

// ---------------------------------------------------------------------------
// JSONL input/output
//
// One JSON object per line, UTF-8. Unknown fields are ignored on read and
// never emitted on write. Malformed lines are reported with their line
// number; blank lines are skipped.

namespace detail {

inline json parse_line(const std::string& file, long line_no, const std::string& line) {
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object())
        throw SchemaViolation(file, line_no, "line is not a JSON object");
    return j;
}

inline const json& require_field(const std::string& file, long line_no, const json& j,
                                 const char* key) {
    auto it = j.find(key);
    if (it == j.end()) throw SchemaViolation(file, line_no, std::string("missing field: ") + key);
    return *it;
}

inline std::string require_string(const std::string& file, long line_no, const json& j,
                                  const char* key) {
    const json& v = require_field(file, line_no, j, key);
    if (!v.is_string()) throw SchemaViolation(file, line_no, std::string(key) + " must be a string");
    return v.get<std::string>();
}

inline TokenSequence parse_tokens(const std::string& file, long line_no, const json& v,
                                  const char* key) {
    if (!v.is_array()) throw SchemaViolation(file, line_no, std::string(key) + " must be an array");
    TokenSequence seq;
    seq.tokens.reserve(v.size());
    for (const auto& t : v) {
        if (!t.is_number_integer() || t.get<Token>() < 0)
            throw SchemaViolation(file, line_no,
                                  std::string(key) + " must contain non-negative integers");
        seq.tokens.push_back(t.get<Token>());
    }
    return seq;
}

template <typename PerLine>
void for_each_line(const std::string& path, PerLine&& fn) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() ||
            line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        fn(line_no, line);
    }
}

inline std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    return out;
}

}  // namespace detail

// prompts.jsonl: {"id", "prompt", "label", "reference"?}
inline std::vector<PromptCase> load_prompt_cases(const std::string& path) {
    std::vector<PromptCase> cases;
    std::unordered_set<std::string> seen;
    detail::for_each_line(path, [&](long line_no, const std::string& line) {
        json j = detail::parse_line(path, line_no, line);
        PromptCase c;
        c.id = detail::require_string(path, line_no, j, "id");
        c.prompt_text = detail::require_string(path, line_no, j, "prompt");
        c.label = [&] {
            std::string s = detail::require_string(path, line_no, j, "label");
            if (s == "contaminated") return Label::Contaminated;
            if (s == "clean") return Label::Clean;
            throw SchemaViolation(path, line_no, "label must be \"contaminated\" or \"clean\"");
        }();
        if (auto it = j.find("reference"); it != j.end() && !it->is_null()) {
            if (!it->is_string())
                throw SchemaViolation(path, line_no, "reference must be a string");
            c.reference_text = it->get<std::string>();
        }
        c.prompt_tokens = text_to_units(c.prompt_text);
        if (c.prompt_tokens.empty())
            throw SchemaViolation(path, line_no, "prompt must contain at least one word");
        if (!seen.insert(c.id).second) throw DuplicateId(c.id);
        cases.push_back(std::move(c));
    });
    return cases;
}

inline void save_prompt_cases(const std::string& path, const std::vector<PromptCase>& cases) {
    auto out = detail::open_out(path);
    for (const auto& c : cases) {
        json j;
        j["id"] = c.id;
        j["prompt"] = c.prompt_text;
        j["label"] = to_string(c.label);
        if (c.reference_text) j["reference"] = *c.reference_text;
        out << j.dump() << '\n';
    }
}

// generations.jsonl: {"prompt_id", "greedy":{"tokens":[...]}, "samples":[...], "n",
//                     "sample_temperature"}
inline std::vector<GenerationRecord> load_generations(const std::string& path) {
    std::vector<GenerationRecord> records;
    detail::for_each_line(path, [&](long line_no, const std::string& line) {
        json j = detail::parse_line(path, line_no, line);
        GenerationRecord r;
        r.prompt_id = detail::require_string(path, line_no, j, "prompt_id");
        const json& g = detail::require_field(path, line_no, j, "greedy");
        if (!g.is_object())
            throw SchemaViolation(path, line_no, "greedy must be an object");
        r.greedy = detail::parse_tokens(path, line_no,
                                        detail::require_field(path, line_no, g, "tokens"),
                                        "greedy.tokens");
        const json& samples = detail::require_field(path, line_no, j, "samples");
        if (!samples.is_array())
            throw SchemaViolation(path, line_no, "samples must be an array");
        for (const auto& s : samples) {
            if (!s.is_object())
                throw SchemaViolation(path, line_no, "samples entries must be objects");
            r.samples.push_back(detail::parse_tokens(
                path, line_no, detail::require_field(path, line_no, s, "tokens"),
                "samples[].tokens"));
        }
        const json& n = detail::require_field(path, line_no, j, "n");
        if (!n.is_number_integer() || n.get<int>() < 1)
            throw SchemaViolation(path, line_no, "n must be a positive integer");
        r.n = n.get<int>();
        if (static_cast<std::size_t>(r.n) != r.samples.size())
            throw SchemaViolation(path, line_no, "n does not match the number of samples");
        const json& t = detail::require_field(path, line_no, j, "sample_temperature");
        if (!t.is_number()) throw SchemaViolation(path, line_no, "sample_temperature must be a number");
        r.sample_temperature = t.get<double>();
        records.push_back(std::move(r));
    });
    return records;
}

inline void save_generations(const std::string& path, const std::vector<GenerationRecord>& records) {
    auto out = detail::open_out(path);
    for (const auto& r : records) {
        json j;
        j["prompt_id"] = r.prompt_id;
        j["greedy"] = json{{"tokens", r.greedy.tokens}};
        json samples = json::array();
        for (const auto& s : r.samples) samples.push_back(json{{"tokens", s.tokens}});
        j["samples"] = std::move(samples);
        j["n"] = r.n;
        j["sample_temperature"] = r.sample_temperature;
        out << j.dump() << '\n';
    }
}

// logprobs.jsonl: {"prompt_id", "tokens":[int], "logprobs":[number|null, ...]}
inline std::vector<PromptLogProbs> load_logprobs(const std::string& path) {
    std::vector<PromptLogProbs> all;
    detail::for_each_line(path, [&](long line_no, const std::string& line) {
        json j = detail::parse_line(path, line_no, line);
        PromptLogProbs lp;
        lp.prompt_id = detail::require_string(path, line_no, j, "prompt_id");
        lp.tokens = detail::parse_tokens(path, line_no,
                                         detail::require_field(path, line_no, j, "tokens"),
                                         "tokens");
        const json& lps = detail::require_field(path, line_no, j, "logprobs");
        if (!lps.is_array())
            throw SchemaViolation(path, line_no, "logprobs must be an array");
        for (const auto& v : lps) {
            if (v.is_null()) {
                lp.logprobs.push_back(std::nullopt);
            } else if (v.is_number()) {
                double d = v.get<double>();
                if (d > 0.0)
                    throw SchemaViolation(path, line_no, "logprobs must be <= 0");
                lp.logprobs.push_back(d);
            } else {
                throw SchemaViolation(path, line_no, "logprobs entries must be numbers or null");
            }
        }
        if (lp.logprobs.size() != lp.tokens.size())
            throw SchemaViolation(path, line_no, "logprobs and tokens must have equal length");
        all.push_back(std::move(lp));
    });
    return all;
}

inline void save_logprobs(const std::string& path, const std::vector<PromptLogProbs>& all) {
    auto out = detail::open_out(path);
    for (const auto& lp : all) {
        json j;
        j["prompt_id"] = lp.prompt_id;
        j["tokens"] = lp.tokens.tokens;
        json arr = json::array();
        for (const auto& v : lp.logprobs) {
            if (v)
                arr.push_back(*v);
            else
                arr.push_back(nullptr);
        }
        j["logprobs"] = std::move(arr);
        out << j.dump() << '\n';
    }
}

// corpus.jsonl: {"text": string}
inline std::vector<std::string> load_corpus(const std::string& path) {
    std::vector<std::string> docs;
    detail::for_each_line(path, [&](long line_no, const std::string& line) {
        json j = detail::parse_line(path, line_no, line);
        docs.push_back(detail::require_string(path, line_no, j, "text"));
    });
    return docs;
}

inline void save_corpus(const std::string& path, const std::vector<std::string>& docs) {
    auto out = detail::open_out(path);
    for (const auto& d : docs) {
        json j;
        j["text"] = d;
        out << j.dump() << '\n';
    }
}

}  // namespace contam
