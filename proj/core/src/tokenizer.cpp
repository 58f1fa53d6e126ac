#include "corepick/tokenizer.hpp"

#include <algorithm>

#include "corepick/errors.hpp"
#include "corepick/text.hpp"

namespace corepick {

TokenTrie::TokenTrie(const Vocabulary& vocab) {
    nodes_.emplace_back();
    for (const auto& e : vocab.entries()) insert(e.text);
    for (auto& node : nodes_) {
        std::sort(node.kids.begin(), node.kids.end());
    }
}

TokenTrie::TokenTrie(const std::vector<std::string_view>& tokens) {
    nodes_.emplace_back();
    for (const auto& t : tokens) insert(t);
    for (auto& node : nodes_) {
        std::sort(node.kids.begin(), node.kids.end());
    }
}

void TokenTrie::insert(std::string_view token) {
    std::int32_t node = 0;
    for (unsigned char b : token) {
        std::int32_t next = -1;
        for (const auto& [kb, kn] : nodes_[static_cast<std::size_t>(node)].kids) {
            if (kb == b) {
                next = kn;
                break;
            }
        }
        if (next < 0) {
            next = static_cast<std::int32_t>(nodes_.size());
            nodes_[static_cast<std::size_t>(node)].kids.emplace_back(b, next);
            nodes_.emplace_back();
        }
        node = next;
    }
    nodes_[static_cast<std::size_t>(node)].terminal = true;
}

std::int32_t TokenTrie::child(std::int32_t node, unsigned char b) const {
    const auto& kids = nodes_[static_cast<std::size_t>(node)].kids;
    auto it = std::lower_bound(
        kids.begin(), kids.end(), b,
        [](const std::pair<unsigned char, std::int32_t>& kid, unsigned char key) {
            return kid.first < key;
        });
    if (it == kids.end() || it->first != b) return -1;
    return it->second;
}

std::size_t TokenTrie::longest_match(std::string_view text, std::size_t pos) const {
    if (nodes_.empty()) return 0;
    std::int32_t node = 0;
    std::size_t best = 0;
    for (std::size_t i = pos; i < text.size(); ++i) {
        node = child(node, static_cast<unsigned char>(text[i]));
        if (node < 0) break;
        if (nodes_[static_cast<std::size_t>(node)].terminal) best = i - pos + 1;
    }
    return best;
}

TokenSequence tokenize(std::string_view text, const TokenTrie& trie,
                       std::string doc_id) {
    TokenSequence seq;
    seq.doc_id = std::move(doc_id);
    std::size_t pos = 0;
    while (pos < text.size()) {
        const std::size_t match = trie.longest_match(text, pos);
        if (match > 0) {
            seq.tokens.emplace_back(text.substr(pos, match));
            pos += match;
        } else {
            const std::size_t unit = utf8_unit_length(text, pos);
            seq.tokens.emplace_back(text.substr(pos, unit));
            ++seq.oov_count;
            pos += unit;
        }
    }
    return seq;
}

std::uint64_t token_count(std::string_view text, const TokenTrie& trie) {
    std::uint64_t n = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        const std::size_t match = trie.longest_match(text, pos);
        pos += match > 0 ? match : utf8_unit_length(text, pos);
        ++n;
    }
    return n;
}

Vocabulary estimate_frequencies(const Vocabulary& vocab,
                                const std::vector<std::string>& docs) {
    if (vocab.empty()) throw ConfigError("vocabulary is empty");
    const TokenTrie trie(vocab);
    std::unordered_map<std::string, double> counts;
    std::uint64_t total = 0;
    for (const auto& doc : docs) {
        std::size_t pos = 0;
        while (pos < doc.size()) {
            const std::size_t match = trie.longest_match(doc, pos);
            if (match > 0) {
                counts[doc.substr(pos, match)] += 1.0;
                ++total;
                pos += match;
            } else {
                pos += utf8_unit_length(doc, pos);  // fallback, not an entry
            }
        }
    }
    if (total == 0) {
        throw InputError("no vocabulary token matches the corpus");
    }
    Vocabulary out = vocab;
    for (auto& [text, count] : counts) {
        count /= static_cast<double>(total);
    }
    out.set_frequencies(counts);
    return out;
}

double nsl(const std::vector<std::uint64_t>& candidate_lengths,
           const std::vector<std::uint64_t>& reference_lengths) {
    if (candidate_lengths.empty() ||
        candidate_lengths.size() != reference_lengths.size()) {
        throw ConfigError("nsl needs equally sized, non-empty length lists");
    }
    std::uint64_t cand = 0;
    std::uint64_t ref = 0;
    for (std::uint64_t v : candidate_lengths) cand += v;
    for (std::uint64_t v : reference_lengths) ref += v;
    if (ref == 0) throw InputError("reference token counts sum to zero");
    return static_cast<double>(cand) / static_cast<double>(ref);
}

}  // namespace corepick
