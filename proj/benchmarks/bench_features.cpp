#include <benchmark/benchmark.h>

#include <random>

#include "bench_common.hpp"
#include "corepick/distribution.hpp"
#include "corepick/features.hpp"
#include "corepick/tokenizer.hpp"

using namespace corepick;

static void BM_Featurize(benchmark::State& state) {
    std::mt19937_64 rng(4);
    const Vocabulary vocab = bench::bench_vocab(rng, 5000);
    const TokenTrie trie(vocab);
    const TokenSequence seq =
        tokenize(bench::bench_text(rng, vocab, static_cast<int>(state.range(0))),
                 trie, "bench");
    FeatureConfig cfg;
    for (auto _ : state) {
        benchmark::DoNotOptimize(featurize(seq, cfg));
    }
    state.SetItemsProcessed(state.iterations() *
                            static_cast<std::int64_t>(seq.tokens.size()));
}
BENCHMARK(BM_Featurize)->Arg(100)->Arg(1000);

static void BM_HashNgram(benchmark::State& state) {
    const std::vector<std::string> ngram = {"importance", "resampling"};
    for (auto _ : state) {
        benchmark::DoNotOptimize(hash_ngram(ngram, 10000));
    }
}
BENCHMARK(BM_HashNgram);

static void BM_EstimateDistribution(benchmark::State& state) {
    std::mt19937_64 rng(5);
    const Vocabulary vocab = bench::bench_vocab(rng, 5000);
    const TokenTrie trie(vocab);
    FeatureConfig cfg;
    std::vector<FeatureVector> vectors;
    for (int d = 0; d < 200; ++d) {
        vectors.push_back(
            featurize(tokenize(bench::bench_text(rng, vocab, 80), trie), cfg));
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(estimate_distribution(vectors, cfg.num_buckets, 0.01));
    }
    state.SetItemsProcessed(state.iterations() * 200);
}
BENCHMARK(BM_EstimateDistribution);
