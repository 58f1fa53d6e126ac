#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace corepick {

enum class Granularity : std::uint8_t { kSubword = 0, kWord = 1, kMultiword = 2 };

std::string_view to_string(Granularity g);
std::optional<Granularity> granularity_from_string(std::string_view s);

struct VocabEntry {
    std::string text;
    Granularity granularity = Granularity::kSubword;
    double freq = 0.0;  // relative frequency on target data
};

/// A set of multi-granular tokens with their target-corpus relative
/// frequencies. Texts are unique; frequencies of the nonzero entries sum to 1
/// once `normalize()` has run. Multiword entries are the only ones allowed to
/// span a word boundary.
class Vocabulary {
public:
    Vocabulary() = default;

    /// Adds an entry. Throws InputError on duplicate text, empty text,
    /// negative/non-finite freq, or a granularity/separator mismatch.
    void add(std::string text, Granularity granularity, double freq);

    bool contains(std::string_view text) const;
    const VocabEntry* find(std::string_view text) const;
    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }
    const std::vector<VocabEntry>& entries() const { return entries_; }

    /// Scales frequencies so they sum to 1. Throws InputError when the total
    /// mass is zero.
    void normalize();

    double total_freq() const;

    /// Mean entry length in Unicode scalar values (l_v).
    double avg_token_length() const;

    /// Replaces the stored frequency of every entry (texts untouched).
    /// `freqs` is keyed by token text; missing texts get zero.
    void set_frequencies(const std::unordered_map<std::string, double>& freqs);

    /// Throws InternalError when an invariant does not hold: duplicate texts,
    /// granularity mismatch, or nonzero frequencies not summing to 1 +- 1e-9.
    void check_invariants() const;

    /// Number of entries whose text is a single Unicode scalar. These act as
    /// the tokenizer's coverage floor and are never pruned.
    std::size_t single_char_count() const;

private:
    std::vector<VocabEntry> entries_;
    std::unordered_map<std::string, std::size_t> index_;
    mutable double cached_length_sum_ = -1.0;
};

enum class MergeKind : std::uint8_t {
    kMultiGranular,
    kMergeUnion,
    kTargetOnly,
    kBaseOnly,
    kMultiwordOnly,
};

std::string_view to_string(MergeKind k);
std::optional<MergeKind> merge_kind_from_string(std::string_view s);

struct GranularityMix {
    double p_subword = 0.6;
    double p_word = 0.3;
    double p_multiword = 0.1;
};

/// Mix presets: both keep 60% subwords and swap the word/multi-word shares.
inline constexpr GranularityMix kWordHeavyMix{0.6, 0.3, 0.1};  // default
inline constexpr GranularityMix kMultiwordHeavyMix{0.6, 0.1, 0.3};

struct MergeStrategy {
    MergeKind kind = MergeKind::kMultiGranular;
    /// Present only for kMultiGranular in fixed-ratio mode.
    std::optional<GranularityMix> mix;
};

struct LearnConfig {
    std::size_t max_words = 10000;
    std::size_t max_multiwords = 10000;
    /// Minimum occurrences before a word sequence becomes a multiword token.
    std::uint64_t min_multiword_count = 5;
    std::size_t min_multiword_len = 2;
    std::size_t max_multiword_len = 4;
};

struct LearnStats {
    std::uint64_t documents = 0;
    std::uint64_t skipped_blank_documents = 0;
    std::uint64_t total_words = 0;
};

/// Mines the task vocabulary from target documents: the most frequent
/// separator-delimited words plus the most frequent 2..4-word contiguous
/// sequences above the count threshold. Frequencies are relative counts over
/// the selected entries. Ties break on lexicographic token text.
/// Throws InputError("empty task corpus") when no document yields a word.
Vocabulary learn_task_vocab(const std::vector<std::string>& task_corpus,
                            const LearnConfig& cfg, LearnStats* stats = nullptr);

/// Combines base and task vocabularies under `strategy`. Union strategies keep
/// the task-side entry when both define the same text. The result is
/// normalized. Throws InputError("merge produced empty vocabulary") when the
/// filter leaves nothing.
Vocabulary merge_vocabs(const Vocabulary& base, const Vocabulary& task,
                        const MergeStrategy& strategy);

/// Keeps the `target_size` highest-frequency entries (ties on text).
Vocabulary truncate_by_rank(const Vocabulary& vocab, std::size_t target_size);

/// Fixed-ratio variant: per-granularity quotas of `target_size` split by
/// `mix` (largest-remainder rounding), each group truncated by frequency
/// rank; unfilled quota spills to the remaining entries by rank.
Vocabulary apply_fixed_ratio(const Vocabulary& vocab, const GranularityMix& mix,
                             std::size_t target_size);

/// Vocabulary utility H_v = -(1/l_v) * sum_j P(j) ln P(j), in nats per
/// character. Zero-frequency entries contribute nothing to the sum but do
/// count toward l_v.
double vocab_utility(const Vocabulary& vocab);

struct PruneTraceRow {
    int step = 0;
    std::size_t size = 0;
    double utility_nats = 0.0;
};

struct PruneResult {
    Vocabulary vocab;
    std::vector<PruneTraceRow> trace;  // one row per executed round
};

/// Greedy utility-guided pruning. Round sizes interpolate geometrically from
/// |vocab| down to `target_size` across `steps` rounds; each round drops the
/// tokens whose individual removal changes H_v least (ties on token text),
/// then re-attributes the removed word/multiword mass onto each token's
/// longest-match decomposition under the survivors. Single-character entries
/// are never dropped; a `target_size` below their count throws ConfigError.
/// A vocabulary already at `target_size` comes back unchanged with an empty
/// trace.
PruneResult prune_vocab(const Vocabulary& vocab, std::size_t target_size,
                        int steps);

/// Scores the removal of every removable entry exactly as one pruning round
/// does: |H(vocab without entry, renormalized) - H(vocab)|. Exposed so tests
/// and tools can inspect the scoring.
std::vector<std::pair<double, std::string>> score_removals(const Vocabulary& vocab);

// --- File formats -----------------------------------------------------------

/// JSON vocabulary file:
/// { "tokens": [ {"text","granularity","freq"}... ], "meta": {"source","size"} }
Vocabulary load_vocabulary(const std::string& path);
void save_vocabulary(const Vocabulary& vocab, const std::string& path,
                     const std::string& source);

/// CSV with header `step,size,utility_nats`.
void save_prune_trace(const std::vector<PruneTraceRow>& trace,
                      const std::string& path);

}  // namespace corepick
