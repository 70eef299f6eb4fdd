#pragma once

#include <algorithm>
#include <cstdlib>
#include <numeric>
#include <optional>
#include <vector>

#include "contam/core.hpp"
#include "contam/errors.hpp"

namespace contam {

/// Maximum number of edits a caller still cares about. Distances above the
/// bound never change a peakedness count, so they need not be exact.
struct EditBudget {
    int bound = 0;
};

/// Exact token-level Levenshtein distance (single-token insertions,
/// deletions, substitutions), two-row dynamic program.
inline int levenshtein(const TokenSequence& a, const TokenSequence& b) {
    const auto& s = a.tokens;
    const auto& t = b.tokens;
    const std::size_t m = s.size(), n = t.size();
    if (m == 0) return static_cast<int>(n);
    if (n == 0) return static_cast<int>(m);

    std::vector<int> prev(n + 1), cur(n + 1);
    std::iota(prev.begin(), prev.end(), 0);
    for (std::size_t i = 1; i <= m; ++i) {
        cur[0] = static_cast<int>(i);
        const Token si = s[i - 1];
        for (std::size_t j = 1; j <= n; ++j) {
            const int cost = si == t[j - 1] ? 0 : 1;
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + cost});
        }
        std::swap(prev, cur);
    }
    return prev[n];
}

/// Banded Levenshtein: returns the exact distance when it is <= budget.bound,
/// std::nullopt ("exceeds") otherwise. The DP only visits cells within
/// |i - j| <= bound and exits as soon as a whole band row exceeds the bound.
inline std::optional<int> levenshtein_within(const TokenSequence& a, const TokenSequence& b,
                                             EditBudget budget) {
    if (budget.bound < 0) throw Error("edit budget must be >= 0");
    const auto& s = a.tokens;
    const auto& t = b.tokens;
    const std::size_t m = s.size(), n = t.size();
    const int bound = budget.bound;

    // Length difference is a lower bound on the distance.
    const long diff = static_cast<long>(m) - static_cast<long>(n);
    if (std::labs(diff) > bound) return std::nullopt;
    if (m == 0) return static_cast<int>(n);
    if (n == 0) return static_cast<int>(m);
    if (bound == 0) return s == t ? std::optional<int>(0) : std::nullopt;

    const int kInf = bound + 1;
    std::vector<int> prev(n + 1, kInf), cur(n + 1, kInf);
    for (std::size_t j = 0; j <= std::min<std::size_t>(n, bound); ++j)
        prev[j] = static_cast<int>(j);

    for (std::size_t i = 1; i <= m; ++i) {
        const std::size_t lo = i > static_cast<std::size_t>(bound) ? i - bound : 1;
        const std::size_t hi = std::min(n, i + bound);
        cur[lo - 1] = lo == 1 && i <= static_cast<std::size_t>(bound) ? static_cast<int>(i) : kInf;
        int row_min = kInf;
        const Token si = s[i - 1];
        for (std::size_t j = lo; j <= hi; ++j) {
            const int cost = si == t[j - 1] ? 0 : 1;
            int v = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + cost});
            v = std::min(v, kInf);
            cur[j] = v;
            row_min = std::min(row_min, v);
        }
        if (row_min > bound) return std::nullopt;
        if (hi + 1 <= n) cur[hi + 1] = kInf;  // seal the band edge for the next row
        std::swap(prev, cur);
    }
    const int d = prev[n];
    if (d > bound) return std::nullopt;
    return d;
}

}  // namespace contam
