#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "corepick/vocab.hpp"

namespace corepick {

/// Byte-level prefix trie over token texts. Immutable after construction and
/// shareable across threads.
class TokenTrie {
public:
    TokenTrie() = default;
    explicit TokenTrie(const Vocabulary& vocab);
    explicit TokenTrie(const std::vector<std::string_view>& tokens);

    /// Length in bytes of the longest token matching a prefix of
    /// `text.substr(pos)`, or 0 when none matches.
    std::size_t longest_match(std::string_view text, std::size_t pos) const;

    bool empty() const { return nodes_.empty(); }

private:
    struct Node {
        std::vector<std::pair<unsigned char, std::int32_t>> kids;  // sorted
        bool terminal = false;
    };

    void insert(std::string_view token);
    std::int32_t child(std::int32_t node, unsigned char b) const;

    std::vector<Node> nodes_;
};

struct TokenSequence {
    std::string doc_id;
    std::vector<std::string> tokens;
    std::uint64_t oov_count = 0;  // single-character fallback emissions
};

/// Greedy longest-match segmentation, left to right over the raw text.
/// Multiword tokens span separators because their text contains them. When no
/// token matches, the next Unicode scalar is emitted as a fallback token and
/// counted in oov_count. Concatenating the result reproduces `text` exactly.
TokenSequence tokenize(std::string_view text, const TokenTrie& trie,
                       std::string doc_id = {});

/// Token count of `text` under greedy matching, without materializing tokens.
std::uint64_t token_count(std::string_view text, const TokenTrie& trie);

/// Re-estimates entry frequencies as relative token counts from greedy
/// tokenization of `docs`. Entries that never match get zero. Throws
/// InputError when no entry matches anything.
Vocabulary estimate_frequencies(const Vocabulary& vocab,
                                const std::vector<std::string>& docs);

/// Normalized sequence length: sum of candidate token counts over sum of
/// reference token counts, paired per document. Throws ConfigError on length
/// mismatch or empty input, InputError when the reference sum is zero.
double nsl(const std::vector<std::uint64_t>& candidate_lengths,
           const std::vector<std::uint64_t>& reference_lengths);

}  // namespace corepick
