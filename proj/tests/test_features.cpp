#include <fstream>
#include <random>
#include <sstream>

#include <doctest.h>

#include "corepick/errors.hpp"
#include "corepick/features.hpp"
#include "test_util.hpp"

using namespace corepick;

namespace {

TokenSequence seq_of(std::vector<std::string> tokens) {
    TokenSequence s;
    s.doc_id = "doc";
    s.tokens = std::move(tokens);
    return s;
}

}  // namespace

TEST_CASE("extract_ngrams enumerates contiguous windows in order") {
    const auto grams = extract_ngrams({"a", "b", "c"}, {1, 2});
    REQUIRE(grams.size() == 5);
    CHECK(grams[0] == std::vector<std::string>{"a"});
    CHECK(grams[1] == std::vector<std::string>{"b"});
    CHECK(grams[2] == std::vector<std::string>{"c"});
    CHECK(grams[3] == std::vector<std::string>{"a", "b"});
    CHECK(grams[4] == std::vector<std::string>{"b", "c"});
}

TEST_CASE("extract_ngrams on short sequences and duplicates") {
    CHECK(extract_ngrams({"a"}, {2}).empty());
    const auto grams = extract_ngrams({"a", "a"}, {1, 2});
    REQUIRE(grams.size() == 3);  // duplicates preserved, multiset semantics
    CHECK(grams[0] == grams[1]);
    CHECK(grams[2] == std::vector<std::string>{"a", "a"});
}

TEST_CASE("hash_ngram matches the pinned reference vectors") {
    std::ifstream golden(std::string(COREPICK_TEST_DATA_DIR) + "/hash_golden.tsv");
    REQUIRE(golden.good());
    std::string line;
    int checked = 0;
    while (std::getline(golden, line)) {
        if (line.empty()) continue;
        std::stringstream row(line);
        std::string field;
        REQUIRE(std::getline(row, field, '\t'));
        const auto buckets = static_cast<std::uint32_t>(std::stoul(field));
        REQUIRE(std::getline(row, field, '\t'));
        const auto expected = static_cast<std::uint32_t>(std::stoul(field));
        std::vector<std::string> ngram;
        while (std::getline(row, field, '\t')) ngram.push_back(field);
        REQUIRE(!ngram.empty());
        CHECK_MESSAGE(hash_ngram(ngram, buckets) == expected,
                      "ngram starting with '" << ngram[0] << "' drifted");
        ++checked;
    }
    CHECK(checked >= 20);
}

TEST_CASE("hash_ngram spec example and determinism") {
    CHECK(hash_ngram({"the"}, 10000) == 924);
    CHECK(hash_ngram({"the", "cat"}, 10000) == hash_ngram({"the", "cat"}, 10000));
    CHECK_THROWS_AS(hash_ngram({}, 100), ConfigError);
}

TEST_CASE("join byte makes token boundaries visible, with a known collision") {
    const std::uint32_t buckets = 1 << 20;
    CHECK(hash_ngram({"ab"}, buckets) != hash_ngram({"a", "b"}, buckets));
    // the documented collision class: a literal 0x1f inside a token
    CHECK(hash_ngram({"a\x1f" "b"}, buckets) == hash_ngram({"a", "b"}, buckets));
}

TEST_CASE("featurize histograms the extracted ngrams") {
    FeatureConfig cfg;
    cfg.num_buckets = 10000;
    cfg.ngram_orders = {1};

    const FeatureVector empty = featurize(seq_of({}), cfg);
    CHECK(empty.total == 0);
    CHECK(empty.counts.empty());

    const FeatureVector two = featurize(seq_of({"a", "b"}), cfg);
    CHECK(two.total == 2);
    REQUIRE(two.counts.size() == 2);  // pinned buckets 1996 and 6629 differ
    CHECK(two.counts.at(hash_ngram({"a"}, 10000)) == 1);
    CHECK(two.counts.at(hash_ngram({"b"}, 10000)) == 1);

    const FeatureVector rep = featurize(seq_of({"a", "a", "a"}), cfg);
    REQUIRE(rep.counts.size() == 1);
    CHECK(rep.counts.begin()->second == 3);
    CHECK(rep.total == 3);
}

TEST_CASE("featurize totals follow the window count identity") {
    std::mt19937_64 rng(99);
    FeatureConfig cfg;
    cfg.num_buckets = 512;
    cfg.ngram_orders = {1, 2, 3};
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t len = rng() % 12;
        std::vector<std::string> tokens;
        for (std::size_t i = 0; i < len; ++i) {
            tokens.push_back(std::string(1, static_cast<char>('a' + rng() % 4)));
        }
        const FeatureVector fv = featurize(seq_of(std::move(tokens)), cfg);
        std::uint64_t expected = 0;
        for (auto n : cfg.ngram_orders) {
            if (len >= n) expected += len - n + 1;
        }
        CHECK(fv.total == expected);
        for (const auto& [bucket, count] : fv.counts) {
            CHECK(bucket < cfg.num_buckets);
            CHECK(count > 0);
        }
    }
}

TEST_CASE("unigram-only featurization is permutation invariant") {
    FeatureConfig cfg;
    cfg.num_buckets = 4096;
    cfg.ngram_orders = {1};
    const FeatureVector a = featurize(seq_of({"x", "y", "z", "x"}), cfg);
    const FeatureVector b = featurize(seq_of({"z", "x", "x", "y"}), cfg);
    CHECK(a.counts == b.counts);

    cfg.ngram_orders = {1, 2};
    const FeatureVector c = featurize(seq_of({"x", "y", "z", "x"}), cfg);
    const FeatureVector d = featurize(seq_of({"z", "x", "x", "y"}), cfg);
    CHECK(c.counts != d.counts);  // bigrams see the order
}

TEST_CASE("bucket occupancy is near uniform over random tokens") {
    std::mt19937_64 rng(2024);
    const std::uint32_t buckets = 100;
    std::vector<std::uint64_t> hits(buckets, 0);
    const std::uint64_t draws = 1000000;
    std::string token;
    for (std::uint64_t i = 0; i < draws; ++i) {
        token.clear();
        std::uint64_t r = rng();
        for (int b = 0; b < 8; ++b) {
            token.push_back(static_cast<char>('a' + (r & 15)));
            r >>= 4;
        }
        ++hits[hash_ngram({token}, buckets)];
    }
    const double expected = static_cast<double>(draws) / buckets;
    double chi2 = 0.0;
    for (auto h : hits) {
        const double d = static_cast<double>(h) - expected;
        chi2 += d * d / expected;
    }
    // dof 99 at the 0.999 quantile (z = 3.0902)
    CHECK(chi2 < testutil::chi2_critical(99, 3.0902));
}

TEST_CASE("feature config validation") {
    FeatureConfig cfg;
    cfg.num_buckets = 1;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.num_buckets = 100;
    cfg.ngram_orders = {};
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.ngram_orders = {2, 1};
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.ngram_orders = {1, 2, 4};
    CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("feature dump line format") {
    FeatureConfig cfg;
    cfg.num_buckets = 100;
    cfg.ngram_orders = {1};
    const FeatureVector fv = featurize(seq_of({"a", "b", "a"}), cfg);
    std::ostringstream out;
    write_feature_line(out, fv);
    const std::string line = out.str();
    CHECK(line.rfind("doc\t3\t", 0) == 0);
    CHECK(line.back() == '\n');
    CHECK(line.find(':') != std::string::npos);
}
