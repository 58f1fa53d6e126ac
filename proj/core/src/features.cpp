#include "corepick/features.hpp"

#include <algorithm>
#include <ostream>

#include "corepick/errors.hpp"
#include "corepick/text.hpp"

namespace corepick {

namespace {

constexpr char kJoinByte = '\x1f';

std::uint64_t hash_ngram_span(const std::string* tokens, std::size_t n) {
    std::uint64_t h = kFnvOffsetBasis;
    for (std::size_t i = 0; i < n; ++i) {
        if (i > 0) {
            h ^= static_cast<unsigned char>(kJoinByte);
            h *= kFnvPrime;
        }
        h = fnv1a64(h, tokens[i]);
    }
    return h;
}

}  // namespace

void FeatureConfig::validate() const {
    if (num_buckets < 2) throw ConfigError("num_buckets must be at least 2");
    if (ngram_orders.empty()) throw ConfigError("ngram_orders must not be empty");
    for (std::size_t i = 0; i < ngram_orders.size(); ++i) {
        if (ngram_orders[i] < 1) throw ConfigError("ngram orders must be >= 1");
        if (i > 0 && ngram_orders[i] <= ngram_orders[i - 1]) {
            throw ConfigError("ngram orders must be ascending and unique");
        }
    }
}

std::vector<std::vector<std::string>> extract_ngrams(
    const std::vector<std::string>& tokens,
    const std::vector<std::uint32_t>& orders) {
    std::vector<std::vector<std::string>> out;
    for (std::uint32_t n : orders) {
        if (n == 0 || tokens.size() < n) continue;
        for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
            out.emplace_back(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                             tokens.begin() + static_cast<std::ptrdiff_t>(i + n));
        }
    }
    return out;
}

std::uint32_t hash_ngram(const std::vector<std::string>& ngram,
                         std::uint32_t num_buckets) {
    if (ngram.empty()) throw ConfigError("cannot hash an empty ngram");
    return static_cast<std::uint32_t>(hash_ngram_span(ngram.data(), ngram.size()) %
                                      num_buckets);
}

FeatureVector featurize(const TokenSequence& doc, const FeatureConfig& cfg) {
    cfg.validate();
    FeatureVector fv;
    fv.doc_id = doc.doc_id;
    fv.num_buckets = cfg.num_buckets;
    for (std::uint32_t n : cfg.ngram_orders) {
        if (doc.tokens.size() < n) continue;
        for (std::size_t i = 0; i + n <= doc.tokens.size(); ++i) {
            const auto bucket = static_cast<std::uint32_t>(
                hash_ngram_span(doc.tokens.data() + i, n) % cfg.num_buckets);
            ++fv.counts[bucket];
            ++fv.total;
        }
    }
    return fv;
}

void write_feature_line(std::ostream& out, const FeatureVector& fv) {
    out << fv.doc_id << '\t' << fv.total << '\t';
    bool first = true;
    for (const auto& [bucket, count] : fv.counts) {
        if (!first) out << ',';
        out << bucket << ':' << count;
        first = false;
    }
    out << '\n';
}

}  // namespace corepick
