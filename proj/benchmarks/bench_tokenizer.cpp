#include <benchmark/benchmark.h>

#include <random>

#include "bench_common.hpp"
#include "corepick/tokenizer.hpp"

using namespace corepick;

static void BM_TrieBuild(benchmark::State& state) {
    std::mt19937_64 rng(1);
    const Vocabulary vocab = bench::bench_vocab(rng, static_cast<int>(state.range(0)));
    for (auto _ : state) {
        TokenTrie trie(vocab);
        benchmark::DoNotOptimize(trie);
    }
    state.SetItemsProcessed(state.iterations() *
                            static_cast<std::int64_t>(vocab.size()));
}
BENCHMARK(BM_TrieBuild)->Arg(1000)->Arg(10000);

static void BM_Tokenize(benchmark::State& state) {
    std::mt19937_64 rng(2);
    const Vocabulary vocab = bench::bench_vocab(rng, 10000);
    const TokenTrie trie(vocab);
    const std::string text =
        bench::bench_text(rng, vocab, static_cast<int>(state.range(0)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(tokenize(text, trie));
    }
    state.SetBytesProcessed(state.iterations() *
                            static_cast<std::int64_t>(text.size()));
}
BENCHMARK(BM_Tokenize)->Arg(100)->Arg(1000);

static void BM_TokenCount(benchmark::State& state) {
    std::mt19937_64 rng(3);
    const Vocabulary vocab = bench::bench_vocab(rng, 10000);
    const TokenTrie trie(vocab);
    const std::string text = bench::bench_text(rng, vocab, 1000);
    for (auto _ : state) {
        benchmark::DoNotOptimize(token_count(text, trie));
    }
    state.SetBytesProcessed(state.iterations() *
                            static_cast<std::int64_t>(text.size()));
}
BENCHMARK(BM_TokenCount);
