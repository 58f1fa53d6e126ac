#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "corepick/corpus.hpp"
#include "corepick/distribution.hpp"
#include "corepick/features.hpp"
#include "corepick/sampler.hpp"
#include "corepick/vocab.hpp"

namespace corepick {

struct PipelineConfig {
    std::vector<std::string> raw_corpus;  // JSONL paths, ingested in order
    std::string task_corpus;              // JSONL path
    std::string base_vocab;               // vocabulary JSON path
    MergeStrategy strategy;
    std::size_t target_vocab_size = 10000;
    int prune_steps = 10;
    FeatureConfig features;  // num_buckets, ngram_orders
    double alpha = 0.01;
    std::size_t k = 0;
    std::uint32_t num_shards = 16;
    bool per_shard = true;  // false: one global selection pool
    std::uint64_t seed = 0;
    std::string output_dir;
    LearnConfig learn;
    unsigned threads = 1;  // 0: hardware concurrency
    bool strict = false;
    bool emit_docs = false;
    bool emit_weights = false;
    bool use_cache = true;

    void validate() const;  // throws ConfigError
};

struct StageTiming {
    std::string stage;
    double millis = 0.0;
};

struct SelectionReport {
    std::uint64_t pool_size = 0;
    std::vector<std::uint64_t> per_shard_docs;
    std::vector<std::uint64_t> per_shard_selected;
    std::size_t k_requested = 0;
    std::size_t k_achieved = 0;
    double kl_target_selected = 0.0;
    double kl_target_random = 0.0;
    double kl_reduction_nats = 0.0;  // always the exact difference of the above
    double nsl_adapted_vs_base = 0.0;
    CorpusStats raw_stats;
    CorpusStats task_stats;
    std::vector<StageTiming> timings;
    std::vector<std::string> warnings;
};

/// Runs the full selection: vocabulary adaptation, featurization of both
/// corpora, distribution estimation, per-shard importance selection, random
/// baseline, metrics. Writes vocab.json, the distribution files, the
/// selected-id list, optional weights/docs, and report.json under
/// cfg.output_dir. Re-running with identical inputs and config reproduces the
/// selected-id list byte for byte at any thread count.
SelectionReport run_pipeline(const PipelineConfig& cfg);

/// Sample Pearson correlation. Throws ConfigError for |x| != |y|, fewer than
/// two points, or zero variance ("degenerate input").
double pearson(const std::vector<double>& x, const std::vector<double>& y);

void save_report(const SelectionReport& report, const PipelineConfig& cfg,
                 const std::string& path);

}  // namespace corepick
