#include <benchmark/benchmark.h>

#include <random>

#include "bench_common.hpp"
#include "corepick/vocab.hpp"

using namespace corepick;

static void BM_PruneVocab(benchmark::State& state) {
    std::mt19937_64 rng(8);
    const Vocabulary vocab =
        bench::bench_vocab(rng, static_cast<int>(state.range(0)));
    const std::size_t target = vocab.size() / 10;
    for (auto _ : state) {
        benchmark::DoNotOptimize(prune_vocab(vocab, target, 10));
    }
    state.SetItemsProcessed(state.iterations() *
                            static_cast<std::int64_t>(vocab.size()));
}
BENCHMARK(BM_PruneVocab)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

static void BM_VocabUtility(benchmark::State& state) {
    std::mt19937_64 rng(9);
    const Vocabulary vocab = bench::bench_vocab(rng, 10000);
    for (auto _ : state) {
        benchmark::DoNotOptimize(vocab_utility(vocab));
    }
    state.SetItemsProcessed(state.iterations() *
                            static_cast<std::int64_t>(vocab.size()));
}
BENCHMARK(BM_VocabUtility);

static void BM_LearnTaskVocab(benchmark::State& state) {
    std::mt19937_64 rng(10);
    const Vocabulary vocab = bench::bench_vocab(rng, 2000);
    std::vector<std::string> corpus;
    for (int d = 0; d < 200; ++d) {
        corpus.push_back(bench::bench_text(rng, vocab, 60));
    }
    LearnConfig cfg;
    cfg.max_words = 1000;
    cfg.max_multiwords = 500;
    for (auto _ : state) {
        benchmark::DoNotOptimize(learn_task_vocab(corpus, cfg));
    }
    state.SetItemsProcessed(state.iterations() * 200);
}
BENCHMARK(BM_LearnTaskVocab)->Unit(benchmark::kMillisecond);
