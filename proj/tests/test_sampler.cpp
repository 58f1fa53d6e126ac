#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

#include <doctest.h>

#include "corepick/errors.hpp"
#include "corepick/sampler.hpp"
#include "test_util.hpp"

using namespace corepick;

namespace {

FeatureVector fv_of(std::uint32_t buckets,
                    std::vector<std::pair<std::uint32_t, std::uint32_t>> counts) {
    FeatureVector fv;
    fv.num_buckets = buckets;
    for (auto [b, c] : counts) {
        fv.counts[b] += c;
        fv.total += c;
    }
    return fv;
}

std::vector<WeightedDoc> docs_with_weights(const std::vector<double>& lws) {
    std::vector<WeightedDoc> docs;
    for (std::size_t i = 0; i < lws.size(); ++i) {
        docs.push_back({"d" + std::to_string(i), lws[i], 0});
    }
    return docs;
}

}  // namespace

TEST_CASE("log importance weight golden values") {
    const auto p = BucketDistribution::from_probs({0.8, 0.2});
    const auto q = BucketDistribution::from_probs({0.5, 0.5});

    const double lw = log_importance_weight(fv_of(2, {{0, 3}, {1, 1}}), p, q);
    const double expected = 3.0 * std::log(1.6) + std::log(0.4);
    CHECK(lw == doctest::Approx(expected).epsilon(1e-12));
    CHECK(expected == doctest::Approx(0.493721).epsilon(1e-5));

    CHECK(log_importance_weight(fv_of(2, {}), p, q) == 0.0);  // empty doc
    CHECK(log_importance_weight(fv_of(2, {{0, 7}}), p, p) == 0.0);

    const auto wide = BucketDistribution::from_probs({0.25, 0.25, 0.25, 0.25});
    CHECK_THROWS_AS(log_importance_weight(fv_of(2, {{0, 1}}), p, wide),
                    ConfigError);
}

TEST_CASE("importance model matches the direct computation") {
    std::mt19937_64 rng(4);
    const auto p = BucketDistribution::from_probs({0.1, 0.2, 0.3, 0.4});
    const auto q = BucketDistribution::from_probs({0.4, 0.3, 0.2, 0.1});
    const ImportanceModel model(p, q);
    for (int trial = 0; trial < 20; ++trial) {
        const auto fv = fv_of(4, {{static_cast<std::uint32_t>(rng() % 4),
                                   static_cast<std::uint32_t>(1 + rng() % 5)},
                                  {static_cast<std::uint32_t>(rng() % 4),
                                   static_cast<std::uint32_t>(1 + rng() % 5)}});
        CHECK(model.log_weight(fv) ==
              doctest::Approx(log_importance_weight(fv, p, q)).epsilon(1e-12));
    }
}

TEST_CASE("gumbel noise is a pure function of seed and id") {
    CHECK(gumbel_noise(1, "a") == gumbel_noise(1, "a"));
    CHECK(gumbel_noise(1, "a") != gumbel_noise(2, "a"));
    CHECK(gumbel_noise(1, "a") != gumbel_noise(1, "b"));
}

TEST_CASE("gumbel_topk selects everything when k = N") {
    const auto docs = docs_with_weights({0.0, 0.0, 0.0, 0.0});
    const SelectionResult r = gumbel_topk(docs, 4, 7);
    CHECK(r.selected.size() == 4);
    CHECK(!r.truncated);
    CHECK(std::set<std::string>(r.selected.begin(), r.selected.end()).size() == 4);
}

TEST_CASE("gumbel_topk is invariant to input order") {
    auto docs = docs_with_weights({0.4, -0.3, 1.2, 0.0, -2.0});
    const SelectionResult a = gumbel_topk(docs, 2, 99);
    std::reverse(docs.begin(), docs.end());
    const SelectionResult b = gumbel_topk(docs, 2, 99);
    CHECK(a.selected == b.selected);  // including output order
}

TEST_CASE("gumbel_topk is shift invariant") {
    auto docs = docs_with_weights({0.4, -0.3, 1.2, 0.0, -2.0});
    const SelectionResult a = gumbel_topk(docs, 3, 1234);
    for (auto& d : docs) d.log_weight += 512.75;
    const SelectionResult b = gumbel_topk(docs, 3, 1234);
    CHECK(a.selected == b.selected);
}

TEST_CASE("a dominant weight is selected almost surely") {
    const auto docs = docs_with_weights({1000.0, 0.0, 0.0});
    int hits = 0;
    const int trials = 10000;
    for (int seed = 0; seed < trials; ++seed) {
        const SelectionResult r =
            gumbel_topk(docs, 1, static_cast<std::uint64_t>(seed));
        if (r.selected[0] == "d0") ++hits;
    }
    CHECK(static_cast<double>(hits) / trials >= 0.999);
}

TEST_CASE("k beyond the pool truncates with a flag") {
    const auto docs = docs_with_weights({0.5, -0.5});
    const SelectionResult r = gumbel_topk(docs, 10, 3);
    CHECK(r.selected.size() == 2);
    CHECK(r.truncated);
    CHECK(r.k == 10);
    CHECK(r.pool_size == 2);
}

TEST_CASE("gumbel_topk rejects bad input") {
    CHECK_THROWS_AS(gumbel_topk({}, 1, 0), ConfigError);
    CHECK_THROWS_AS(gumbel_topk(docs_with_weights({0.0}), 0, 0), ConfigError);
    std::vector<WeightedDoc> bad = {{"x", std::nan(""), 0}};
    CHECK_THROWS_AS(gumbel_topk(bad, 1, 0), ConfigError);
}

TEST_CASE("topk orders by score then id and merges associatively") {
    TopK top(3);
    top.push(1.0, "b");
    top.push(1.0, "a");
    top.push(0.5, "c");
    top.push(2.0, "d");
    auto sorted = std::move(top).take_sorted();
    REQUIRE(sorted.size() == 3);
    CHECK(sorted[0].second == "d");
    CHECK(sorted[1].second == "a");  // tie at 1.0 broken by ascending id
    CHECK(sorted[2].second == "b");

    std::mt19937_64 rng(8);
    std::vector<std::pair<double, std::string>> items;
    for (int i = 0; i < 200; ++i) {
        items.emplace_back(std::uniform_real_distribution<double>(0, 1)(rng),
                           "id" + std::to_string(i));
    }
    TopK whole(10);
    for (const auto& [s, id] : items) whole.push(s, id);

    TopK left(10);
    TopK right(10);
    for (std::size_t i = 0; i < items.size(); ++i) {
        (i % 2 == 0 ? left : right).push(items[i].first, items[i].second);
    }
    left.merge(std::move(right));
    CHECK(std::move(left).take_sorted() == std::move(whole).take_sorted());
}

TEST_CASE("random_select is deterministic and uniform") {
    std::vector<std::string> ids;
    for (int i = 0; i < 10; ++i) ids.push_back("doc" + std::to_string(i));

    const SelectionResult once = random_select(ids, 3, 42);
    const SelectionResult twice = random_select(ids, 3, 42);
    CHECK(once.selected == twice.selected);
    CHECK(once.selected.size() == 3);

    const SelectionResult all = random_select(ids, 10, 1);
    CHECK(all.selected.size() == 10);

    // frequencies of the C(10,3) = 120 subsets over many seeds
    std::map<std::set<std::string>, int> counts;
    const int trials = 60000;
    for (int seed = 0; seed < trials; ++seed) {
        const SelectionResult r =
            random_select(ids, 3, static_cast<std::uint64_t>(seed));
        counts[std::set<std::string>(r.selected.begin(), r.selected.end())] += 1;
    }
    CHECK(counts.size() == 120);
    const double expected = static_cast<double>(trials) / 120.0;
    double chi2 = 0.0;
    for (const auto& [subset, n] : counts) {
        const double d = n - expected;
        chi2 += d * d / expected;
    }
    CHECK(chi2 < testutil::chi2_critical(119, 3.0902));
}

TEST_CASE("random baseline stream differs from the selection stream") {
    std::vector<std::string> ids;
    for (int i = 0; i < 40; ++i) ids.push_back("doc" + std::to_string(i));
    std::vector<WeightedDoc> docs;
    for (const auto& id : ids) docs.push_back({id, 0.0, 0});

    const SelectionResult weighted = gumbel_topk(docs, 5, 777);
    const SelectionResult uniform = random_select(ids, 5, 777);
    CHECK(weighted.selected != uniform.selected);
}
