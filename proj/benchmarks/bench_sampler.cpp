#include <benchmark/benchmark.h>

#include <random>

#include "corepick/sampler.hpp"

using namespace corepick;

static void BM_GumbelNoise(benchmark::State& state) {
    for (auto _ : state) {
        benchmark::DoNotOptimize(gumbel_noise(42, "document-000123"));
    }
}
BENCHMARK(BM_GumbelNoise);

static void BM_GumbelTopK(benchmark::State& state) {
    std::mt19937_64 rng(6);
    std::normal_distribution<double> weight(0.0, 2.0);
    std::vector<WeightedDoc> docs;
    const auto n = static_cast<std::size_t>(state.range(0));
    for (std::size_t i = 0; i < n; ++i) {
        docs.push_back({"doc" + std::to_string(i), weight(rng), 0});
    }
    const std::size_t k = n / 20;
    std::uint64_t seed = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(gumbel_topk(docs, k, seed++));
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_GumbelTopK)->Arg(10000)->Arg(100000);

static void BM_TopKMerge(benchmark::State& state) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> score(0.0, 1.0);
    std::vector<std::pair<double, std::string>> items;
    for (int i = 0; i < 10000; ++i) {
        items.emplace_back(score(rng), "doc" + std::to_string(i));
    }
    for (auto _ : state) {
        TopK left(500);
        TopK right(500);
        for (std::size_t i = 0; i < items.size(); ++i) {
            (i % 2 == 0 ? left : right).push(items[i].first, items[i].second);
        }
        left.merge(std::move(right));
        benchmark::DoNotOptimize(std::move(left).take_sorted());
    }
    state.SetItemsProcessed(state.iterations() *
                            static_cast<std::int64_t>(items.size()));
}
BENCHMARK(BM_TopKMerge);
