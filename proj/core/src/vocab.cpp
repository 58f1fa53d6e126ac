#include "corepick/vocab.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "corepick/errors.hpp"
#include "corepick/text.hpp"
#include "corepick/tokenizer.hpp"

namespace corepick {

std::string_view to_string(Granularity g) {
    switch (g) {
        case Granularity::kSubword: return "subword";
        case Granularity::kWord: return "word";
        case Granularity::kMultiword: return "multiword";
    }
    return "subword";
}

std::optional<Granularity> granularity_from_string(std::string_view s) {
    if (s == "subword") return Granularity::kSubword;
    if (s == "word") return Granularity::kWord;
    if (s == "multiword") return Granularity::kMultiword;
    return std::nullopt;
}

std::string_view to_string(MergeKind k) {
    switch (k) {
        case MergeKind::kMultiGranular: return "multi-granular";
        case MergeKind::kMergeUnion: return "merge-union";
        case MergeKind::kTargetOnly: return "target-only";
        case MergeKind::kBaseOnly: return "base-only";
        case MergeKind::kMultiwordOnly: return "multiword-only";
    }
    return "multi-granular";
}

std::optional<MergeKind> merge_kind_from_string(std::string_view s) {
    if (s == "multi-granular") return MergeKind::kMultiGranular;
    if (s == "merge-union") return MergeKind::kMergeUnion;
    if (s == "target-only") return MergeKind::kTargetOnly;
    if (s == "base-only") return MergeKind::kBaseOnly;
    if (s == "multiword-only") return MergeKind::kMultiwordOnly;
    return std::nullopt;
}

void Vocabulary::add(std::string text, Granularity granularity, double freq) {
    if (text.empty()) throw InputError("vocabulary token with empty text");
    if (!(freq >= 0.0) || !std::isfinite(freq)) {
        throw InputError("vocabulary token '" + text + "' with invalid frequency");
    }
    const bool internal = has_internal_separator(text);
    if (granularity == Granularity::kMultiword && !internal) {
        throw InputError("multiword token '" + text +
                         "' has no internal word separator");
    }
    if (granularity != Granularity::kMultiword && internal) {
        throw InputError("token '" + text +
                         "' spans a word boundary but is not tagged multiword");
    }
    auto [it, inserted] = index_.emplace(text, entries_.size());
    if (!inserted) throw InputError("duplicate vocabulary token '" + text + "'");
    entries_.push_back(VocabEntry{std::move(text), granularity, freq});
    cached_length_sum_ = -1.0;
}

bool Vocabulary::contains(std::string_view text) const {
    return index_.find(std::string(text)) != index_.end();
}

const VocabEntry* Vocabulary::find(std::string_view text) const {
    auto it = index_.find(std::string(text));
    if (it == index_.end()) return nullptr;
    return &entries_[it->second];
}

double Vocabulary::total_freq() const {
    double total = 0.0;
    for (const auto& e : entries_) total += e.freq;
    return total;
}

void Vocabulary::normalize() {
    const double total = total_freq();
    if (total <= 0.0) throw InputError("vocabulary has no frequency mass");
    for (auto& e : entries_) e.freq /= total;
}

double Vocabulary::avg_token_length() const {
    if (entries_.empty()) return 0.0;
    if (cached_length_sum_ < 0.0) {
        double sum = 0.0;
        for (const auto& e : entries_) {
            sum += static_cast<double>(codepoint_count(e.text));
        }
        cached_length_sum_ = sum;
    }
    return cached_length_sum_ / static_cast<double>(entries_.size());
}

void Vocabulary::set_frequencies(
    const std::unordered_map<std::string, double>& freqs) {
    for (auto& e : entries_) {
        auto it = freqs.find(e.text);
        e.freq = it == freqs.end() ? 0.0 : it->second;
    }
}

void Vocabulary::check_invariants() const {
    for (const auto& e : entries_) {
        const bool internal = has_internal_separator(e.text);
        if ((e.granularity == Granularity::kMultiword) != internal) {
            throw InternalError("granularity tag does not match token text '" +
                                e.text + "'");
        }
        if (!(e.freq >= 0.0) || !std::isfinite(e.freq)) {
            throw InternalError("invalid frequency for token '" + e.text + "'");
        }
    }
    if (!entries_.empty()) {
        const double total = total_freq();
        if (std::abs(total - 1.0) > 1e-9) {
            throw InternalError("vocabulary frequencies sum to " +
                                std::to_string(total) + ", expected 1");
        }
    }
}

std::size_t Vocabulary::single_char_count() const {
    std::size_t n = 0;
    for (const auto& e : entries_) {
        if (codepoint_count(e.text) == 1) ++n;
    }
    return n;
}

namespace {

/// Splits a document into separator-delimited words (maximal runs of
/// non-separator scalars).
std::vector<std::string_view> split_words(std::string_view doc) {
    std::vector<std::string_view> words;
    std::size_t pos = 0;
    std::size_t word_start = std::string_view::npos;
    while (pos < doc.size()) {
        const std::size_t here = pos;
        const char32_t cp = decode_utf8(doc, pos);
        if (is_word_separator(cp)) {
            if (word_start != std::string_view::npos) {
                words.push_back(doc.substr(word_start, here - word_start));
                word_start = std::string_view::npos;
            }
        } else if (word_start == std::string_view::npos) {
            word_start = here;
        }
    }
    if (word_start != std::string_view::npos) {
        words.push_back(doc.substr(word_start));
    }
    return words;
}

struct CountedToken {
    std::string text;
    std::uint64_t count = 0;
};

/// Top `limit` tokens by (count desc, text asc).
std::vector<CountedToken> top_by_count(
    std::unordered_map<std::string, std::uint64_t>&& counts, std::size_t limit,
    std::uint64_t min_count) {
    std::vector<CountedToken> all;
    all.reserve(counts.size());
    for (auto& [text, count] : counts) {
        if (count >= min_count) all.push_back({text, count});
    }
    std::sort(all.begin(), all.end(), [](const CountedToken& a, const CountedToken& b) {
        if (a.count != b.count) return a.count > b.count;
        return a.text < b.text;
    });
    if (all.size() > limit) all.resize(limit);
    return all;
}

}  // namespace

Vocabulary learn_task_vocab(const std::vector<std::string>& task_corpus,
                            const LearnConfig& cfg, LearnStats* stats) {
    if (task_corpus.empty()) throw InputError("empty task corpus");
    if (cfg.max_words == 0 && cfg.max_multiwords == 0) {
        throw ConfigError("max_words and max_multiwords are both zero");
    }
    if (cfg.min_multiword_len < 2 || cfg.max_multiword_len < cfg.min_multiword_len) {
        throw ConfigError("invalid multiword length range");
    }

    LearnStats local;
    std::unordered_map<std::string, std::uint64_t> word_counts;
    std::unordered_map<std::string, std::uint64_t> phrase_counts;
    std::string phrase;

    for (const auto& doc : task_corpus) {
        ++local.documents;
        const auto words = split_words(doc);
        if (words.empty()) {
            ++local.skipped_blank_documents;
            continue;
        }
        local.total_words += words.size();
        for (const auto& w : words) ++word_counts[std::string(w)];
        if (cfg.max_multiwords > 0) {
            for (std::size_t len = cfg.min_multiword_len;
                 len <= cfg.max_multiword_len && len <= words.size(); ++len) {
                for (std::size_t i = 0; i + len <= words.size(); ++i) {
                    phrase.clear();
                    for (std::size_t j = 0; j < len; ++j) {
                        if (j > 0) phrase.push_back(' ');
                        phrase.append(words[i + j]);
                    }
                    ++phrase_counts[phrase];
                }
            }
        }
    }
    if (stats != nullptr) *stats = local;
    if (local.total_words == 0) throw InputError("empty task corpus");

    const auto words = top_by_count(std::move(word_counts), cfg.max_words, 1);
    const auto phrases = top_by_count(std::move(phrase_counts), cfg.max_multiwords,
                                      cfg.min_multiword_count);

    std::uint64_t total = 0;
    for (const auto& t : words) total += t.count;
    for (const auto& t : phrases) total += t.count;

    Vocabulary vocab;
    for (const auto& t : words) {
        vocab.add(t.text, Granularity::kWord,
                  static_cast<double>(t.count) / static_cast<double>(total));
    }
    for (const auto& t : phrases) {
        vocab.add(t.text, Granularity::kMultiword,
                  static_cast<double>(t.count) / static_cast<double>(total));
    }
    return vocab;
}

namespace {

Vocabulary union_of(const Vocabulary& base, const Vocabulary& task) {
    Vocabulary out;
    for (const auto& e : task.entries()) out.add(e.text, e.granularity, e.freq);
    for (const auto& e : base.entries()) {
        if (!out.contains(e.text)) out.add(e.text, e.granularity, e.freq);
    }
    return out;
}

Vocabulary filtered(const Vocabulary& src,
                    const std::function<bool(const VocabEntry&)>& keep) {
    Vocabulary out;
    for (const auto& e : src.entries()) {
        if (keep(e)) out.add(e.text, e.granularity, e.freq);
    }
    return out;
}

}  // namespace

Vocabulary merge_vocabs(const Vocabulary& base, const Vocabulary& task,
                        const MergeStrategy& strategy) {
    if (strategy.mix.has_value() && strategy.kind != MergeKind::kMultiGranular) {
        throw ConfigError("granularity mix is only valid for multi-granular merge");
    }
    Vocabulary out;
    switch (strategy.kind) {
        case MergeKind::kMultiGranular:
        case MergeKind::kMergeUnion:
            out = union_of(base, task);
            break;
        case MergeKind::kTargetOnly:
            out = filtered(task, [](const VocabEntry& e) {
                return e.granularity != Granularity::kMultiword;
            });
            break;
        case MergeKind::kBaseOnly:
            out = filtered(base, [](const VocabEntry&) { return true; });
            break;
        case MergeKind::kMultiwordOnly:
            out = filtered(union_of(base, task), [](const VocabEntry& e) {
                return e.granularity == Granularity::kMultiword;
            });
            break;
    }
    if (out.empty()) throw InputError("merge produced empty vocabulary");
    out.normalize();
    return out;
}

namespace {

std::vector<std::size_t> rank_order(const Vocabulary& vocab) {
    std::vector<std::size_t> order(vocab.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    const auto& entries = vocab.entries();
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (entries[a].freq != entries[b].freq) {
            return entries[a].freq > entries[b].freq;
        }
        return entries[a].text < entries[b].text;
    });
    return order;
}

Vocabulary from_selected(const Vocabulary& vocab,
                         const std::vector<bool>& selected) {
    Vocabulary out;
    for (std::size_t i = 0; i < vocab.size(); ++i) {
        if (selected[i]) {
            const auto& e = vocab.entries()[i];
            out.add(e.text, e.granularity, e.freq);
        }
    }
    out.normalize();
    return out;
}

}  // namespace

Vocabulary truncate_by_rank(const Vocabulary& vocab, std::size_t target_size) {
    if (target_size == 0) throw ConfigError("target size must be positive");
    if (vocab.size() <= target_size) return vocab;
    const auto order = rank_order(vocab);
    std::vector<bool> selected(vocab.size(), false);
    for (std::size_t r = 0; r < target_size; ++r) selected[order[r]] = true;
    return from_selected(vocab, selected);
}

Vocabulary apply_fixed_ratio(const Vocabulary& vocab, const GranularityMix& mix,
                             std::size_t target_size) {
    if (target_size == 0) throw ConfigError("target size must be positive");
    const double mix_sum = mix.p_subword + mix.p_word + mix.p_multiword;
    if (mix.p_subword < 0 || mix.p_word < 0 || mix.p_multiword < 0 ||
        std::abs(mix_sum - 1.0) > 1e-9) {
        throw ConfigError("granularity mix must be non-negative and sum to 1");
    }
    if (vocab.size() <= target_size) return vocab;

    const double shares[3] = {mix.p_subword, mix.p_word, mix.p_multiword};
    std::size_t quota[3];
    double frac[3];
    std::size_t assigned = 0;
    for (int g = 0; g < 3; ++g) {
        const double exact = shares[g] * static_cast<double>(target_size);
        quota[g] = static_cast<std::size_t>(exact);
        frac[g] = exact - static_cast<double>(quota[g]);
        assigned += quota[g];
    }
    // Largest-remainder rounding; ties go to the finer granularity.
    int by_frac[3] = {0, 1, 2};
    std::sort(by_frac, by_frac + 3, [&](int a, int b) {
        if (frac[a] != frac[b]) return frac[a] > frac[b];
        return a < b;
    });
    for (int i = 0; assigned < target_size; ++i) {
        ++quota[by_frac[i % 3]];
        ++assigned;
    }

    const auto order = rank_order(vocab);
    const auto& entries = vocab.entries();
    std::vector<bool> selected(vocab.size(), false);
    std::size_t taken[3] = {0, 0, 0};
    std::size_t total_taken = 0;
    for (std::size_t idx : order) {
        const int g = static_cast<int>(entries[idx].granularity);
        if (taken[g] < quota[g]) {
            selected[idx] = true;
            ++taken[g];
            ++total_taken;
        }
    }
    // Quota a granularity could not fill spills to the best remaining entries.
    for (std::size_t idx : order) {
        if (total_taken >= target_size) break;
        if (!selected[idx]) {
            selected[idx] = true;
            ++total_taken;
        }
    }
    return from_selected(vocab, selected);
}

double vocab_utility(const Vocabulary& vocab) {
    if (vocab.empty()) throw ConfigError("vocabulary is empty");
    const double total = vocab.total_freq();
    if (total <= 0.0) throw ConfigError("vocabulary has no frequency mass");
    if (std::abs(total - 1.0) > 1e-6) {
        throw ConfigError("vocabulary frequencies are not normalized");
    }
    const double l_v = vocab.avg_token_length();
    double sum = 0.0;
    for (const auto& e : vocab.entries()) {
        if (e.freq > 0.0) sum += e.freq * std::log(e.freq);
    }
    return -sum / l_v;
}

namespace {

struct PruneState {
    std::vector<std::string> texts;
    std::vector<Granularity> grans;
    std::vector<double> freqs;      // normalized
    std::vector<double> lengths;    // codepoints
    std::vector<bool> removable;    // false for single-scalar entries
};

double utility_of(const PruneState& st) {
    double entropy = 0.0;
    double length_sum = 0.0;
    for (std::size_t i = 0; i < st.texts.size(); ++i) {
        if (st.freqs[i] > 0.0) entropy += st.freqs[i] * std::log(st.freqs[i]);
        length_sum += st.lengths[i];
    }
    const double l_v = length_sum / static_cast<double>(st.texts.size());
    return -entropy / l_v;
}

/// |H after removing entry i (renormalized) - H before|, in closed form.
double removal_score(double entropy, double length_sum, std::size_t n,
                     double freq, double length) {
    const double h_before = -entropy / (length_sum / static_cast<double>(n));
    const double keep_mass = 1.0 - freq;
    double entropy_after = 0.0;
    if (keep_mass > 1e-15) {
        const double scale = 1.0 / keep_mass;
        const double dropped = freq > 0.0 ? freq * std::log(freq) : 0.0;
        entropy_after = scale * (entropy - dropped) + std::log(scale);
    }
    const double l_after =
        (length_sum - length) / static_cast<double>(n - 1);
    const double h_after = -entropy_after / l_after;
    return std::abs(h_after - h_before);
}

std::vector<std::size_t> geometric_schedule(std::size_t start, std::size_t target,
                                            int steps) {
    std::vector<std::size_t> sizes(static_cast<std::size_t>(steps));
    const double ratio = static_cast<double>(target) / static_cast<double>(start);
    std::size_t prev = start;
    for (int i = 1; i <= steps; ++i) {
        const double exact =
            static_cast<double>(start) *
            std::pow(ratio, static_cast<double>(i) / static_cast<double>(steps));
        auto size = static_cast<std::size_t>(std::llround(exact));
        size = std::min(size, prev);
        size = std::max(size, target);
        sizes[static_cast<std::size_t>(i) - 1] = size;
        prev = size;
    }
    sizes.back() = target;
    return sizes;
}

}  // namespace

std::vector<std::pair<double, std::string>> score_removals(const Vocabulary& vocab) {
    if (vocab.size() < 2) return {};
    double entropy = 0.0;
    double length_sum = 0.0;
    for (const auto& e : vocab.entries()) {
        if (e.freq > 0.0) entropy += e.freq * std::log(e.freq);
        length_sum += static_cast<double>(codepoint_count(e.text));
    }
    std::vector<std::pair<double, std::string>> scores;
    scores.reserve(vocab.size());
    for (const auto& e : vocab.entries()) {
        const auto len = codepoint_count(e.text);
        if (len == 1) continue;
        scores.emplace_back(removal_score(entropy, length_sum, vocab.size(),
                                          e.freq, static_cast<double>(len)),
                            e.text);
    }
    std::sort(scores.begin(), scores.end());
    return scores;
}

PruneResult prune_vocab(const Vocabulary& vocab, std::size_t target_size,
                        int steps) {
    if (target_size == 0) throw ConfigError("target size must be positive");
    if (steps < 1) throw ConfigError("prune steps must be at least 1");
    if (vocab.size() < target_size) {
        throw ConfigError("target size exceeds vocabulary size");
    }
    const std::size_t singles = vocab.single_char_count();
    if (target_size < singles) {
        throw ConfigError(
            "target size below the single-character coverage set (" +
            std::to_string(singles) + " tokens)");
    }
    if (vocab.size() == target_size) return {vocab, {}};

    PruneState st;
    st.texts.reserve(vocab.size());
    for (const auto& e : vocab.entries()) {
        st.texts.push_back(e.text);
        st.grans.push_back(e.granularity);
        st.freqs.push_back(e.freq);
        const auto len = codepoint_count(e.text);
        st.lengths.push_back(static_cast<double>(len));
        st.removable.push_back(len > 1);
    }
    {
        double total = 0.0;
        for (double f : st.freqs) total += f;
        if (total <= 0.0) throw InputError("vocabulary has no frequency mass");
        for (double& f : st.freqs) f /= total;
    }

    const auto schedule = geometric_schedule(vocab.size(), target_size, steps);
    std::vector<PruneTraceRow> trace;
    trace.reserve(schedule.size());

    for (int round = 1; round <= steps; ++round) {
        const std::size_t next_size = schedule[static_cast<std::size_t>(round) - 1];
        const std::size_t cur_size = st.texts.size();
        if (next_size < cur_size) {
            const std::size_t remove_n = cur_size - next_size;

            double entropy = 0.0;
            double length_sum = 0.0;
            for (std::size_t i = 0; i < cur_size; ++i) {
                if (st.freqs[i] > 0.0) entropy += st.freqs[i] * std::log(st.freqs[i]);
                length_sum += st.lengths[i];
            }

            std::vector<std::size_t> candidates;
            candidates.reserve(cur_size);
            std::vector<double> scores(cur_size, 0.0);
            for (std::size_t i = 0; i < cur_size; ++i) {
                if (!st.removable[i]) continue;
                scores[i] = removal_score(entropy, length_sum, cur_size,
                                          st.freqs[i], st.lengths[i]);
                candidates.push_back(i);
            }
            if (candidates.size() < remove_n) {
                throw InternalError("prune schedule exceeds removable entries");
            }
            std::nth_element(candidates.begin(),
                             candidates.begin() + static_cast<std::ptrdiff_t>(remove_n),
                             candidates.end(),
                             [&](std::size_t a, std::size_t b) {
                                 if (scores[a] != scores[b]) return scores[a] < scores[b];
                                 return st.texts[a] < st.texts[b];
                             });
            std::sort(candidates.begin(),
                      candidates.begin() + static_cast<std::ptrdiff_t>(remove_n),
                      [&](std::size_t a, std::size_t b) {
                          if (scores[a] != scores[b]) return scores[a] < scores[b];
                          return st.texts[a] < st.texts[b];
                      });

            std::vector<bool> removed(cur_size, false);
            for (std::size_t r = 0; r < remove_n; ++r) removed[candidates[r]] = true;

            PruneState survivors;
            survivors.texts.reserve(next_size);
            std::unordered_map<std::string_view, std::size_t> survivor_index;
            for (std::size_t i = 0; i < cur_size; ++i) {
                if (removed[i]) continue;
                survivors.texts.push_back(std::move(st.texts[i]));
                survivors.grans.push_back(st.grans[i]);
                survivors.freqs.push_back(st.freqs[i]);
                survivors.lengths.push_back(st.lengths[i]);
                survivors.removable.push_back(st.removable[i]);
            }
            survivor_index.reserve(survivors.texts.size());
            for (std::size_t i = 0; i < survivors.texts.size(); ++i) {
                survivor_index.emplace(survivors.texts[i], i);
            }

            // Removed word/multiword mass flows onto each token of its
            // longest-match decomposition under the survivors.
            std::vector<std::string_view> survivor_views(survivors.texts.begin(),
                                                         survivors.texts.end());
            const TokenTrie trie(survivor_views);
            for (std::size_t i = 0; i < cur_size; ++i) {
                if (!removed[i]) continue;
                if (st.grans[i] == Granularity::kSubword || st.freqs[i] <= 0.0) {
                    continue;
                }
                const std::string& text = st.texts[i];
                std::size_t pos = 0;
                while (pos < text.size()) {
                    const std::size_t match = trie.longest_match(text, pos);
                    if (match == 0) {
                        pos += utf8_unit_length(text, pos);
                        continue;
                    }
                    auto it = survivor_index.find(
                        std::string_view(text).substr(pos, match));
                    if (it != survivor_index.end()) {
                        survivors.freqs[it->second] += st.freqs[i];
                    }
                    pos += match;
                }
            }

            double total = 0.0;
            for (double f : survivors.freqs) total += f;
            if (total <= 0.0) {
                throw InternalError("pruning removed all frequency mass");
            }
            for (double& f : survivors.freqs) f /= total;

            st = std::move(survivors);
        }
        trace.push_back(PruneTraceRow{round, st.texts.size(), utility_of(st)});
    }

    Vocabulary out;
    for (std::size_t i = 0; i < st.texts.size(); ++i) {
        out.add(std::move(st.texts[i]), st.grans[i], st.freqs[i]);
    }
    return {std::move(out), std::move(trace)};
}

Vocabulary load_vocabulary(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open vocabulary file: " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw InputError("malformed vocabulary file " + path + ": " + e.what());
    }
    if (!doc.is_object() || !doc.contains("tokens") || !doc["tokens"].is_array()) {
        throw InputError("vocabulary file " + path + " lacks a tokens array");
    }
    Vocabulary vocab;
    for (const auto& item : doc["tokens"]) {
        if (!item.is_object() || !item.contains("text") ||
            !item.contains("granularity")) {
            throw InputError("vocabulary file " + path + " has a malformed token");
        }
        const auto gran =
            granularity_from_string(item["granularity"].get<std::string>());
        if (!gran.has_value()) {
            throw InputError("vocabulary file " + path +
                             " has an unknown granularity tag");
        }
        const double freq = item.value("freq", 0.0);
        vocab.add(item["text"].get<std::string>(), *gran, freq);
    }
    if (vocab.empty()) throw InputError("vocabulary file " + path + " is empty");
    return vocab;
}

void save_vocabulary(const Vocabulary& vocab, const std::string& path,
                     const std::string& source) {
    nlohmann::json tokens = nlohmann::json::array();
    for (const auto& e : vocab.entries()) {
        tokens.push_back({{"text", e.text},
                          {"granularity", std::string(to_string(e.granularity))},
                          {"freq", e.freq}});
    }
    nlohmann::json doc = {
        {"tokens", std::move(tokens)},
        {"meta", {{"source", source}, {"size", vocab.size()}}},
    };
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write vocabulary file: " + path);
    out << doc.dump(2) << '\n';
    if (!out) throw InputError("failed writing vocabulary file: " + path);
}

void save_prune_trace(const std::vector<PruneTraceRow>& trace,
                      const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write prune trace: " + path);
    out << "step,size,utility_nats\n";
    out.precision(17);
    for (const auto& row : trace) {
        out << row.step << ',' << row.size << ',' << row.utility_nats << '\n';
    }
    if (!out) throw InputError("failed writing prune trace: " + path);
}

}  // namespace corepick
