#pragma once

#include <random>
#include <string>
#include <vector>

#include "corepick/vocab.hpp"

namespace bench {

inline std::vector<std::string> word_pool(std::mt19937_64& rng, int n, int min_len,
                                          int max_len) {
    std::uniform_int_distribution<int> len(min_len, max_len);
    std::uniform_int_distribution<int> letter('a', 'z');
    std::vector<std::string> words;
    words.reserve(n);
    for (int i = 0; i < n; ++i) {
        std::string w;
        const int l = len(rng);
        for (int j = 0; j < l; ++j) w.push_back(static_cast<char>(letter(rng)));
        words.push_back(std::move(w));
    }
    return words;
}

/// A vocabulary of single chars plus `n_words` words, normalized.
inline corepick::Vocabulary bench_vocab(std::mt19937_64& rng, int n_words) {
    corepick::Vocabulary v;
    v.add(" ", corepick::Granularity::kSubword, 1.0);
    for (char c = 'a'; c <= 'z'; ++c) {
        v.add(std::string(1, c), corepick::Granularity::kSubword, 1.0);
    }
    for (const auto& w : word_pool(rng, n_words, 3, 9)) {
        if (!v.contains(w)) v.add(w, corepick::Granularity::kWord, 1.0);
    }
    v.normalize();
    return v;
}

/// Space-joined text of `n_tokens` drawn from the vocabulary's words.
inline std::string bench_text(std::mt19937_64& rng, const corepick::Vocabulary& v,
                              int n_tokens) {
    std::vector<const std::string*> words;
    for (const auto& e : v.entries()) {
        if (e.granularity == corepick::Granularity::kWord) words.push_back(&e.text);
    }
    std::uniform_int_distribution<std::size_t> pick(0, words.size() - 1);
    std::string text;
    for (int i = 0; i < n_tokens; ++i) {
        if (i > 0) text += ' ';
        text += *words[pick(rng)];
    }
    return text;
}

}  // namespace bench
