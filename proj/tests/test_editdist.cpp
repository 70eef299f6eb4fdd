#include <doctest.h>

#include <algorithm>

#include "contam/editdist.hpp"
#include "contam/simulator.hpp"
#include "oracles.hpp"

using namespace contam;

namespace {

TokenSequence seq(std::initializer_list<Token> ts) { return TokenSequence{ts}; }

TokenSequence random_seq(rng::Stream& st, int max_len, std::int64_t vocab) {
    const int len = static_cast<int>(st.uniform_int(max_len + 1));
    TokenSequence s;
    for (int i = 0; i < len; ++i) s.tokens.push_back(st.uniform_int(vocab));
    return s;
}

}  // namespace

TEST_CASE("levenshtein basics") {
    CHECK(levenshtein(seq({}), seq({})) == 0);
    CHECK(levenshtein(seq({1, 2, 3}), seq({1, 2, 3})) == 0);
    CHECK(levenshtein(seq({}), seq({1, 2, 3, 4, 5, 6, 7})) == 7);
    CHECK(levenshtein(seq({1, 2, 3, 4, 5, 6, 7}), seq({})) == 7);
    // one substitution / insertion / deletion away from identity
    CHECK(levenshtein(seq({1, 2, 3}), seq({1, 9, 3})) == 1);
    CHECK(levenshtein(seq({1, 2, 3}), seq({1, 2, 3, 4})) == 1);
    CHECK(levenshtein(seq({1, 2, 3}), seq({1, 3})) == 1);
    CHECK(levenshtein(seq({1, 2, 3, 4}), seq({2, 3, 4, 5})) == 2);
}

TEST_CASE("levenshtein agrees with the naive recursive oracle") {
    rng::Stream st(12345);
    for (int trial = 0; trial < 300; ++trial) {
        const TokenSequence a = random_seq(st, 10, 5);
        const TokenSequence b = random_seq(st, 10, 5);
        CHECK(levenshtein(a, b) == oracle::lev_naive(a, b));
    }
}

TEST_CASE("metric laws on random triples") {
    rng::Stream st(777);
    for (int trial = 0; trial < 200; ++trial) {
        const TokenSequence a = random_seq(st, 20, 4);
        const TokenSequence b = random_seq(st, 20, 4);
        const TokenSequence c = random_seq(st, 20, 4);
        const int ab = levenshtein(a, b);
        const int ba = levenshtein(b, a);
        const int ac = levenshtein(a, c);
        const int bc = levenshtein(b, c);
        CHECK(ab == ba);
        CHECK((ab == 0) == (a == b));
        CHECK(ac <= ab + bc);
        const long len_diff =
            std::labs(static_cast<long>(a.size()) - static_cast<long>(b.size()));
        CHECK(ab >= len_diff);
        CHECK(ab <= static_cast<int>(std::max(a.size(), b.size())));
    }
}

TEST_CASE("levenshtein_within exact within bound, exceeds otherwise") {
    CHECK(levenshtein_within(seq({}), seq({}), EditBudget{0}) == 0);
    CHECK(levenshtein_within(seq({1, 2}), seq({1, 2}), EditBudget{0}) == 0);
    CHECK(!levenshtein_within(seq({1, 2}), seq({1, 3}), EditBudget{0}).has_value());

    // length difference alone forces "exceeds"
    TokenSequence long_a, short_b;
    for (int i = 0; i < 100; ++i) long_a.tokens.push_back(i);
    for (int i = 0; i < 40; ++i) short_b.tokens.push_back(i);
    CHECK(!levenshtein_within(long_a, short_b, EditBudget{5}).has_value());

    rng::Stream st(999);
    for (int trial = 0; trial < 400; ++trial) {
        const TokenSequence a = random_seq(st, 14, 4);
        const TokenSequence b = random_seq(st, 14, 4);
        const int exact = levenshtein(a, b);
        for (int bound = 0; bound <= 10; ++bound) {
            const auto within = levenshtein_within(a, b, EditBudget{bound});
            if (exact <= bound) {
                REQUIRE(within.has_value());
                CHECK(*within == exact);
            } else {
                CHECK(!within.has_value());
            }
        }
    }
}

TEST_CASE("levenshtein_within with a huge bound equals levenshtein") {
    rng::Stream st(4242);
    for (int trial = 0; trial < 200; ++trial) {
        const TokenSequence a = random_seq(st, 25, 6);
        const TokenSequence b = random_seq(st, 25, 6);
        const auto within = levenshtein_within(a, b, EditBudget{1000});
        REQUIRE(within.has_value());
        CHECK(*within == levenshtein(a, b));
    }
}
