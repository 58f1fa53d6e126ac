#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "corepick/distribution.hpp"
#include "corepick/features.hpp"

namespace corepick {

struct WeightedDoc {
    std::string doc_id;
    double log_weight = 0.0;  // nats
    std::uint32_t shard_id = 0;
};

struct SelectionResult {
    std::vector<std::string> selected;  // descending perturbed score
    std::size_t k = 0;
    std::size_t pool_size = 0;
    std::uint64_t seed = 0;
    bool truncated = false;  // k exceeded the pool, everything was taken
};

/// log w_i = sum_b count_b * (ln p_b - ln q_b): the bag-of-buckets importance
/// log-weight. Empty feature vectors score 0. Throws ConfigError on a bucket
/// count mismatch.
double log_importance_weight(const FeatureVector& fv, const BucketDistribution& p,
                             const BucketDistribution& q);

/// Per-bucket log(p/q) table, for weighing many documents against one pair of
/// distributions.
class ImportanceModel {
public:
    ImportanceModel(const BucketDistribution& target, const BucketDistribution& raw);
    double log_weight(const FeatureVector& fv) const;
    std::uint32_t num_buckets() const {
        return static_cast<std::uint32_t>(log_ratio_.size());
    }

private:
    std::vector<double> log_ratio_;
};

/// Deterministic Gumbel(0,1) draw for (seed, doc_id). Counter-based: the value
/// depends only on the key, never on call order or thread schedule.
double gumbel_noise(std::uint64_t seed, std::string_view doc_id);

/// Derives an independent noise stream (e.g. the random baseline) from the
/// run seed and a label.
std::uint64_t derive_stream_seed(std::uint64_t seed, std::string_view label);

/// Samples k documents without replacement from the categorical distribution
/// proportional to exp(log_weight): add Gumbel noise keyed by (seed, doc_id),
/// keep the k largest perturbed scores. Ties break on ascending doc_id. Output
/// is ordered by descending perturbed score. When k exceeds the pool, the
/// whole pool comes back with `truncated` set.
SelectionResult gumbel_topk(const std::vector<WeightedDoc>& docs, std::size_t k,
                            std::uint64_t seed);

/// Uniform sampling without replacement with the same determinism contract,
/// drawn from a stream independent of gumbel_topk's.
SelectionResult random_select(const std::vector<std::string>& doc_ids,
                              std::size_t k, std::uint64_t seed);

/// Bounded top-k of (score, doc_id) pairs, largest first. Merging per-worker
/// instances is associative and commutative, so any parallel schedule yields
/// the same result.
class TopK {
public:
    explicit TopK(std::size_t k);

    void push(double score, std::string doc_id);
    void merge(TopK&& other);
    std::size_t capacity() const { return k_; }

    /// (score, doc_id) pairs by descending score, ties on ascending doc_id.
    std::vector<std::pair<double, std::string>> take_sorted() &&;

private:
    struct Item {
        double score;
        std::string doc_id;
    };
    static bool worse(const Item& a, const Item& b);

    std::size_t k_;
    std::vector<Item> heap_;  // min-heap on (score, reversed id order)
};

}  // namespace corepick
