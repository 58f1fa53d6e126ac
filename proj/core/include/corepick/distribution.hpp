#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "corepick/features.hpp"

namespace corepick {

/// Additively smoothed probability vector over the hash buckets. Every entry
/// is strictly positive and the entries sum to 1.
struct BucketDistribution {
    std::vector<double> probs;
    std::uint32_t num_buckets = 0;
    double smoothing_alpha = 0.0;
    std::uint64_t support_total = 0;  // raw count mass before smoothing

    /// Validates and wraps explicit probabilities (used by tests and tools).
    static BucketDistribution from_probs(std::vector<double> probs,
                                         double alpha = 0.0);
};

/// Mergeable bucket-count accumulator. Partial sums merge associatively, so
/// any partitioning of the input stream yields identical counts.
class BucketAccumulator {
public:
    explicit BucketAccumulator(std::uint32_t num_buckets);

    void add(const FeatureVector& fv);  // throws ConfigError on B mismatch
    void merge(const BucketAccumulator& other);

    std::uint64_t document_count() const { return documents_; }
    std::uint64_t total() const { return total_; }
    std::uint32_t num_buckets() const {
        return static_cast<std::uint32_t>(counts_.size());
    }

    /// probs[b] = (C_b + alpha) / (C + alpha * B)
    BucketDistribution finalize(double alpha) const;

private:
    std::vector<std::uint64_t> counts_;
    std::uint64_t total_ = 0;
    std::uint64_t documents_ = 0;
};

BucketDistribution estimate_distribution(const std::vector<FeatureVector>& vectors,
                                         std::uint32_t num_buckets, double alpha);

/// KL(p || q) in nats; finite because smoothing forbids zero entries.
double kl_divergence(const BucketDistribution& p, const BucketDistribution& q);

/// KL(target || random_baseline) - KL(target || selected). Positive when the
/// selection moved closer to the target than random sampling.
double kl_reduction(const BucketDistribution& target,
                    const BucketDistribution& selected,
                    const BucketDistribution& random_baseline);

/// Binary distribution file: magic "BKDT", u32 version, u32 B, f64 alpha,
/// then B little-endian f64 probabilities. A JSON sidecar at `path + ".json"`
/// records provenance.
void save_distribution(const BucketDistribution& dist, const std::string& path,
                       const std::string& corpus, std::uint64_t doc_count);
BucketDistribution load_distribution(const std::string& path);

}  // namespace corepick
