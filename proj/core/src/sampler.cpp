#include "corepick/sampler.hpp"

#include <algorithm>
#include <cmath>

#include "corepick/errors.hpp"
#include "corepick/text.hpp"

namespace corepick {

double log_importance_weight(const FeatureVector& fv, const BucketDistribution& p,
                             const BucketDistribution& q) {
    if (p.num_buckets != q.num_buckets || fv.num_buckets != p.num_buckets) {
        throw ConfigError("bucket count mismatch between feature vector and "
                          "distributions");
    }
    double sum = 0.0;
    for (const auto& [bucket, count] : fv.counts) {
        sum += static_cast<double>(count) *
               (std::log(p.probs[bucket]) - std::log(q.probs[bucket]));
    }
    return sum;
}

ImportanceModel::ImportanceModel(const BucketDistribution& target,
                                 const BucketDistribution& raw) {
    if (target.num_buckets != raw.num_buckets) {
        throw ConfigError("bucket count mismatch between distributions");
    }
    log_ratio_.resize(target.probs.size());
    for (std::size_t b = 0; b < log_ratio_.size(); ++b) {
        log_ratio_[b] = std::log(target.probs[b]) - std::log(raw.probs[b]);
    }
}

double ImportanceModel::log_weight(const FeatureVector& fv) const {
    if (fv.num_buckets != num_buckets()) {
        throw ConfigError("bucket count mismatch between feature vector and model");
    }
    double sum = 0.0;
    for (const auto& [bucket, count] : fv.counts) {
        sum += static_cast<double>(count) * log_ratio_[bucket];
    }
    return sum;
}

double gumbel_noise(std::uint64_t seed, std::string_view doc_id) {
    const std::uint64_t key = splitmix64(fnv1a64(doc_id) ^ splitmix64(seed));
    // 53-bit mantissa draw, offset half a step so u lies strictly inside (0,1).
    const double u = (static_cast<double>(key >> 11) + 0.5) * 0x1.0p-53;
    return -std::log(-std::log(u));
}

std::uint64_t derive_stream_seed(std::uint64_t seed, std::string_view label) {
    return splitmix64(seed ^ fnv1a64(label));
}

bool TopK::worse(const Item& a, const Item& b) {
    if (a.score != b.score) return a.score < b.score;
    return a.doc_id > b.doc_id;
}

TopK::TopK(std::size_t k) : k_(k) {
    heap_.reserve(k);
}

void TopK::push(double score, std::string doc_id) {
    if (k_ == 0) return;
    auto better_heap = [](const Item& a, const Item& b) { return worse(b, a); };
    if (heap_.size() < k_) {
        heap_.push_back(Item{score, std::move(doc_id)});
        std::push_heap(heap_.begin(), heap_.end(), better_heap);
        return;
    }
    const Item candidate{score, std::move(doc_id)};
    if (worse(heap_.front(), candidate)) {
        std::pop_heap(heap_.begin(), heap_.end(), better_heap);
        heap_.back() = candidate;
        std::push_heap(heap_.begin(), heap_.end(), better_heap);
    }
}

void TopK::merge(TopK&& other) {
    for (auto& item : other.heap_) {
        push(item.score, std::move(item.doc_id));
    }
    other.heap_.clear();
}

std::vector<std::pair<double, std::string>> TopK::take_sorted() && {
    std::sort(heap_.begin(), heap_.end(),
              [](const Item& a, const Item& b) { return worse(b, a); });
    std::vector<std::pair<double, std::string>> out;
    out.reserve(heap_.size());
    for (auto& item : heap_) {
        out.emplace_back(item.score, std::move(item.doc_id));
    }
    heap_.clear();
    return out;
}

SelectionResult gumbel_topk(const std::vector<WeightedDoc>& docs, std::size_t k,
                            std::uint64_t seed) {
    if (k < 1) throw ConfigError("selection size k must be at least 1");
    if (docs.empty()) throw ConfigError("selection pool is empty");
    TopK top(std::min(k, docs.size()));
    for (const auto& doc : docs) {
        if (!std::isfinite(doc.log_weight)) {
            throw ConfigError("non-finite log weight for document '" +
                              doc.doc_id + "'");
        }
        top.push(doc.log_weight + gumbel_noise(seed, doc.doc_id), doc.doc_id);
    }
    SelectionResult result;
    result.k = k;
    result.pool_size = docs.size();
    result.seed = seed;
    result.truncated = k > docs.size();
    for (auto& [score, id] : std::move(top).take_sorted()) {
        result.selected.push_back(std::move(id));
    }
    return result;
}

SelectionResult random_select(const std::vector<std::string>& doc_ids,
                              std::size_t k, std::uint64_t seed) {
    if (k < 1) throw ConfigError("selection size k must be at least 1");
    if (doc_ids.empty()) throw ConfigError("selection pool is empty");
    const std::uint64_t stream = derive_stream_seed(seed, "random-baseline");
    TopK top(std::min(k, doc_ids.size()));
    for (const auto& id : doc_ids) {
        top.push(gumbel_noise(stream, id), id);
    }
    SelectionResult result;
    result.k = k;
    result.pool_size = doc_ids.size();
    result.seed = seed;
    result.truncated = k > doc_ids.size();
    for (auto& [score, id] : std::move(top).take_sorted()) {
        result.selected.push_back(std::move(id));
    }
    return result;
}

}  // namespace corepick
