#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "corepick/tokenizer.hpp"

namespace corepick {

struct FeatureConfig {
    std::uint32_t num_buckets = 10000;
    std::vector<std::uint32_t> ngram_orders = {1, 2};  // ascending, unique

    void validate() const;  // throws ConfigError
};

/// Sparse hashed n-gram count vector for one document.
struct FeatureVector {
    std::string doc_id;
    std::map<std::uint32_t, std::uint32_t> counts;  // bucket -> count, ordered
    std::uint64_t total = 0;
    std::uint32_t num_buckets = 0;
};

/// All contiguous token subsequences of every requested order, in document
/// order. Orders longer than the document contribute nothing.
std::vector<std::vector<std::string>> extract_ngrams(
    const std::vector<std::string>& tokens,
    const std::vector<std::uint32_t>& orders);

/// Bucket of one n-gram: FNV-1a 64 over the token texts' UTF-8 bytes joined
/// by 0x1F, modulo `num_buckets`. Tokens containing a literal 0x1F collide
/// with the corresponding joined n-gram; that class is accepted.
std::uint32_t hash_ngram(const std::vector<std::string>& ngram,
                         std::uint32_t num_buckets);

/// Histogram of hash_ngram over extract_ngrams, computed without
/// materializing the n-grams.
FeatureVector featurize(const TokenSequence& doc, const FeatureConfig& cfg);

/// Debug dump line: `doc_id TAB total TAB bucket:count,...` sorted by bucket.
void write_feature_line(std::ostream& out, const FeatureVector& fv);

}  // namespace corepick
