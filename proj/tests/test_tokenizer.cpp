#include <numeric>
#include <random>

#include <doctest.h>

#include "corepick/errors.hpp"
#include "corepick/tokenizer.hpp"
#include "test_util.hpp"

using namespace corepick;
using testutil::make_vocab;

namespace {

std::string join(const std::vector<std::string>& tokens) {
    std::string out;
    for (const auto& t : tokens) out += t;
    return out;
}

}  // namespace

TEST_CASE("multiword tokens win the longest match across separators") {
    const auto v = make_vocab({{"new york", Granularity::kMultiword, 0.4},
                               {"new", Granularity::kWord, 0.3},
                               {"york", Granularity::kWord, 0.2},
                               {" ", Granularity::kSubword, 0.1}});
    const TokenTrie trie(v);
    const TokenSequence seq = tokenize("new york", trie, "d1");
    REQUIRE(seq.tokens.size() == 1);
    CHECK(seq.tokens[0] == "new york");
    CHECK(seq.oov_count == 0);
    CHECK(seq.doc_id == "d1");
}

TEST_CASE("unmatched characters fall back one scalar at a time") {
    const auto v = make_vocab({{"x", Granularity::kSubword, 1.0}});
    const TokenTrie trie(v);
    const TokenSequence seq = tokenize("abc", trie);
    CHECK(seq.tokens == std::vector<std::string>{"a", "b", "c"});
    CHECK(seq.oov_count == 3);
}

TEST_CASE("greedy takes the longest prefix even when it splits worse") {
    const auto v = make_vocab({{"a", Granularity::kSubword, 0.4},
                               {"aa", Granularity::kSubword, 0.3},
                               {"ab", Granularity::kSubword, 0.3}});
    const TokenTrie trie(v);
    const TokenSequence seq = tokenize("aab", trie);
    CHECK(seq.tokens == std::vector<std::string>{"aa", "b"});
    CHECK(seq.oov_count == 1);
}

TEST_CASE("unicode fallback keeps whole scalars") {
    const auto v = make_vocab({{"ab", Granularity::kSubword, 1.0}});
    const TokenTrie trie(v);
    const TokenSequence seq = tokenize("\xE4\xB8\xAD" "ab\xF0\x9F\x98\x80", trie);
    REQUIRE(seq.tokens.size() == 3);
    CHECK(seq.tokens[0] == "\xE4\xB8\xAD");
    CHECK(seq.tokens[1] == "ab");
    CHECK(seq.tokens[2] == "\xF0\x9F\x98\x80");
    CHECK(seq.oov_count == 2);
}

TEST_CASE("tokenize round trip on random utf-8 with random vocabularies") {
    std::mt19937_64 rng(1234);
    std::uniform_int_distribution<int> vocab_size(0, 12);
    for (int trial = 0; trial < 300; ++trial) {
        const std::string text = testutil::random_utf8(rng, 60);
        // vocab from random slices of the text plus random junk
        std::vector<std::string> tokens;
        for (int i = 0; i < vocab_size(rng); ++i) {
            if (!text.empty() && rng() % 2 == 0) {
                const std::size_t begin = rng() % text.size();
                const std::size_t len = 1 + rng() % 8;
                tokens.push_back(text.substr(begin, len));
            } else {
                tokens.push_back(testutil::random_utf8(rng, 4));
            }
        }
        std::vector<std::string_view> views;
        for (const auto& t : tokens) {
            if (!t.empty()) views.push_back(t);
        }
        const TokenTrie trie(views);
        const TokenSequence seq = tokenize(text, trie);
        CHECK(join(seq.tokens) == text);
        CHECK(seq.oov_count <= seq.tokens.size());
        CHECK(token_count(text, trie) == seq.tokens.size());
    }
}

TEST_CASE("tokenize is deterministic") {
    const auto v = make_vocab({{"ab", Granularity::kSubword, 0.5},
                               {"bc", Granularity::kSubword, 0.5}});
    const TokenTrie trie(v);
    const auto a = tokenize("abcabc", trie);
    const auto b = tokenize("abcabc", trie);
    CHECK(a.tokens == b.tokens);
    CHECK(a.oov_count == b.oov_count);
}

TEST_CASE("estimate_frequencies counts greedy token usage") {
    const auto v = make_vocab({{"ab", Granularity::kSubword, 0.0},
                               {"c", Granularity::kSubword, 0.0},
                               {"zz", Granularity::kSubword, 0.0}});
    const Vocabulary est = estimate_frequencies(v, {"abc abc"});
    // matches: ab, c, ab, c (the space falls back and is not an entry)
    CHECK(est.find("ab")->freq == doctest::Approx(0.5));
    CHECK(est.find("c")->freq == doctest::Approx(0.5));
    CHECK(est.find("zz")->freq == doctest::Approx(0.0));

    const auto none = make_vocab({{"qq", Granularity::kSubword, 1.0}});
    CHECK_THROWS_AS(estimate_frequencies(none, {"abc"}), InputError);
}

TEST_CASE("nsl golden values and errors") {
    CHECK(nsl({5, 5}, {5, 5}) == doctest::Approx(1.0));
    CHECK(nsl({4, 6}, {8, 12}) == doctest::Approx(0.5));
    CHECK_THROWS_AS(nsl({}, {}), ConfigError);
    CHECK_THROWS_AS(nsl({1, 2}, {1}), ConfigError);
    CHECK_THROWS_AS(nsl({1}, {0}), InputError);
}
