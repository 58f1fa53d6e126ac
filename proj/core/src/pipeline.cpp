#include "corepick/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <thread>
#include <unordered_set>

#include <json.hpp>

#include "corepick/errors.hpp"
#include "corepick/text.hpp"
#include "corepick/tokenizer.hpp"

namespace corepick {

namespace fs = std::filesystem;
using nlohmann::json;

void PipelineConfig::validate() const {
    if (raw_corpus.empty()) throw ConfigError("no raw corpus given");
    if (task_corpus.empty()) throw ConfigError("no task corpus given");
    if (base_vocab.empty()) throw ConfigError("no base vocabulary given");
    if (output_dir.empty()) throw ConfigError("no output directory given");
    if (k < 1) throw ConfigError("selection size k must be at least 1");
    if (num_shards < 1) throw ConfigError("num_shards must be at least 1");
    if (target_vocab_size < 1) throw ConfigError("target vocabulary size must be positive");
    if (prune_steps < 1) throw ConfigError("prune steps must be at least 1");
    if (!(alpha > 0.0)) throw ConfigError("smoothing alpha must be positive");
    features.validate();
    if (strategy.mix.has_value() && strategy.kind != MergeKind::kMultiGranular) {
        throw ConfigError("granularity mix is only valid for multi-granular merge");
    }
}

namespace {

unsigned effective_threads(unsigned requested) {
    if (requested != 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

class StageTimer {
public:
    explicit StageTimer(std::vector<StageTiming>& sink, std::string stage)
        : sink_(sink), stage_(std::move(stage)),
          start_(std::chrono::steady_clock::now()) {}
    ~StageTimer() {
        const auto elapsed = std::chrono::steady_clock::now() - start_;
        sink_.push_back(StageTiming{
            stage_,
            std::chrono::duration<double, std::milli>(elapsed).count()});
    }

private:
    std::vector<StageTiming>& sink_;
    std::string stage_;
    std::chrono::steady_clock::time_point start_;
};

/// Runs fn(worker, begin, end) over contiguous slices of [0, n).
void parallel_slices(std::size_t n, unsigned threads,
                     const std::function<void(unsigned, std::size_t, std::size_t)>& fn) {
    if (n == 0) return;
    const unsigned workers =
        static_cast<unsigned>(std::min<std::size_t>(threads, n));
    if (workers <= 1) {
        fn(0, 0, n);
        return;
    }
    const std::size_t per = (n + workers - 1) / workers;
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (unsigned w = 1; w < workers; ++w) {
        const std::size_t begin = std::min(n, static_cast<std::size_t>(w) * per);
        const std::size_t end = std::min(n, begin + per);
        pool.emplace_back([&, w, begin, end] {
            try {
                fn(w, begin, end);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    try {
        fn(0, 0, std::min(n, per));
    } catch (...) {
        errors[0] = std::current_exception();
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

constexpr std::size_t kChunkDocs = 4096;

/// Streams all corpus files in order, handing off chunks with their global
/// base index (round-robin sharding keys off that index).
void stream_corpus(const std::vector<std::string>& paths, bool strict,
                   CorpusStats* stats,
                   const std::function<void(std::vector<Document>&, std::uint64_t)>& on_chunk) {
    std::vector<Document> chunk;
    chunk.reserve(kChunkDocs);
    std::uint64_t base = 0;
    for (const auto& path : paths) {
        for_each_document(path, strict, [&](Document&& doc) {
            chunk.push_back(std::move(doc));
            if (chunk.size() == kChunkDocs) {
                on_chunk(chunk, base);
                base += chunk.size();
                chunk.clear();
            }
        }, stats);
    }
    if (!chunk.empty()) {
        on_chunk(chunk, base);
    }
}

std::uint64_t hash_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open input file: " + path);
    std::uint64_t h = kFnvOffsetBasis;
    char buf[1 << 16];
    while (in) {
        in.read(buf, sizeof(buf));
        h = fnv1a64(h, std::string_view(buf, static_cast<std::size_t>(in.gcount())));
    }
    return h;
}

std::uint64_t hash_text(std::uint64_t h, const std::string& s) {
    h = fnv1a64(h, s);
    return fnv1a64(h, std::string_view("\x1f", 1));
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

/// Content-hash keyed stage cache backed by <output_dir>/manifest.json.
class StageCache {
public:
    StageCache(const fs::path& dir, bool enabled)
        : path_(dir / "manifest.json"), enabled_(enabled) {
        if (!enabled_) return;
        std::ifstream in(path_);
        if (!in) return;
        json doc = json::parse(in, nullptr, false);
        if (!doc.is_discarded() && doc.is_object() && doc.contains("stages")) {
            manifest_ = std::move(doc);
        }
    }

    bool fresh(const std::string& stage, const std::string& hash) const {
        if (!enabled_) return false;
        const auto stages = manifest_.find("stages");
        if (stages == manifest_.end() || !stages->is_object()) return false;
        const auto it = stages->find(stage);
        return it != stages->end() && it->is_object() &&
               it->value("hash", "") == hash;
    }

    /// Only valid for a stage that fresh() just accepted.
    json stage_data(const std::string& stage) const {
        return manifest_.at("stages").at(stage);
    }

    void update(const std::string& stage, const std::string& hash, json data = {}) {
        if (!manifest_.is_object()) manifest_ = json{{"stages", json::object()}};
        data["hash"] = hash;
        manifest_["stages"][stage] = std::move(data);
    }

    void save() const {
        if (!enabled_) return;
        std::ofstream out(path_, std::ios::binary | std::ios::trunc);
        if (out) out << manifest_.dump(2) << '\n';
    }

private:
    fs::path path_;
    bool enabled_;
    json manifest_ = json::object();
};

json config_echo(const PipelineConfig& cfg) {
    json mix = nullptr;
    if (cfg.strategy.mix.has_value()) {
        mix = {{"subword", cfg.strategy.mix->p_subword},
               {"word", cfg.strategy.mix->p_word},
               {"multiword", cfg.strategy.mix->p_multiword}};
    }
    return json{
        {"raw_corpus", cfg.raw_corpus},
        {"task_corpus", cfg.task_corpus},
        {"base_vocab", cfg.base_vocab},
        {"strategy", std::string(to_string(cfg.strategy.kind))},
        {"mix", std::move(mix)},
        {"target_vocab_size", cfg.target_vocab_size},
        {"prune_steps", cfg.prune_steps},
        {"num_buckets", cfg.features.num_buckets},
        {"ngram_orders", cfg.features.ngram_orders},
        {"alpha", cfg.alpha},
        {"k", cfg.k},
        {"num_shards", cfg.num_shards},
        {"per_shard", cfg.per_shard},
        {"seed", cfg.seed},
        {"output_dir", cfg.output_dir},
        {"max_words", cfg.learn.max_words},
        {"max_multiwords", cfg.learn.max_multiwords},
        {"min_multiword_count", cfg.learn.min_multiword_count},
        {"threads", cfg.threads},
        {"strict", cfg.strict},
    };
}

std::string vocab_stage_hash(const PipelineConfig& cfg) {
    std::uint64_t h = kFnvOffsetBasis;
    h = hash_text(h, "vocab-v1");
    h = hash_text(h, hex64(hash_file(cfg.base_vocab)));
    h = hash_text(h, hex64(hash_file(cfg.task_corpus)));
    h = hash_text(h, std::string(to_string(cfg.strategy.kind)));
    if (cfg.strategy.mix.has_value()) {
        h = hash_text(h, std::to_string(cfg.strategy.mix->p_subword));
        h = hash_text(h, std::to_string(cfg.strategy.mix->p_word));
        h = hash_text(h, std::to_string(cfg.strategy.mix->p_multiword));
    }
    h = hash_text(h, std::to_string(cfg.target_vocab_size));
    h = hash_text(h, std::to_string(cfg.prune_steps));
    h = hash_text(h, std::to_string(cfg.learn.max_words));
    h = hash_text(h, std::to_string(cfg.learn.max_multiwords));
    h = hash_text(h, std::to_string(cfg.learn.min_multiword_count));
    h = hash_text(h, cfg.strict ? "strict" : "lenient");
    return hex64(h);
}

std::string feature_params(const PipelineConfig& cfg) {
    std::string s = std::to_string(cfg.features.num_buckets);
    for (auto n : cfg.features.ngram_orders) s += "," + std::to_string(n);
    s += ";" + std::to_string(cfg.alpha);
    return s;
}

struct VocabStage {
    Vocabulary base;     // as loaded, the NSL reference
    Vocabulary adapted;  // merged + bounded
    std::vector<PruneTraceRow> trace;
};

VocabStage build_vocab_stage(const PipelineConfig& cfg,
                             const std::vector<std::string>& task_texts,
                             std::vector<std::string>& warnings) {
    VocabStage stage;
    stage.base = load_vocabulary(cfg.base_vocab);
    Vocabulary base_est = estimate_frequencies(stage.base, task_texts);

    LearnStats learn_stats;
    const Vocabulary task = learn_task_vocab(task_texts, cfg.learn, &learn_stats);
    if (learn_stats.skipped_blank_documents > 0) {
        warnings.push_back("task corpus: skipped " +
                           std::to_string(learn_stats.skipped_blank_documents) +
                           " blank documents");
    }

    const Vocabulary merged = merge_vocabs(base_est, task, cfg.strategy);
    if (cfg.strategy.kind == MergeKind::kMultiGranular) {
        if (cfg.strategy.mix.has_value()) {
            stage.adapted =
                apply_fixed_ratio(merged, *cfg.strategy.mix, cfg.target_vocab_size);
        } else if (merged.size() > cfg.target_vocab_size) {
            PruneResult pruned =
                prune_vocab(merged, cfg.target_vocab_size, cfg.prune_steps);
            stage.adapted = std::move(pruned.vocab);
            stage.trace = std::move(pruned.trace);
        } else {
            stage.adapted = merged;
        }
    } else {
        stage.adapted = truncate_by_rank(merged, cfg.target_vocab_size);
    }
    return stage;
}

/// Splits k across shards: k/S each, remainder to the lowest shard ids, then
/// overflow beyond a shard's pool water-fills into shards with spare room.
std::vector<std::size_t> compute_quotas(const std::vector<std::uint64_t>& pool,
                                        std::size_t k,
                                        std::vector<std::string>& warnings) {
    const std::size_t shards = pool.size();
    std::vector<std::size_t> quota(shards, 0);
    for (std::size_t s = 0; s < shards; ++s) {
        quota[s] = k / shards + (s < k % shards ? 1 : 0);
    }
    std::size_t deficit = 0;
    bool clamped = false;
    for (std::size_t s = 0; s < shards; ++s) {
        if (quota[s] > pool[s]) {
            deficit += quota[s] - pool[s];
            quota[s] = pool[s];
            clamped = true;
        }
    }
    for (std::size_t s = 0; s < shards && deficit > 0; ++s) {
        const std::size_t room = static_cast<std::size_t>(pool[s]) - quota[s];
        const std::size_t take = std::min(room, deficit);
        quota[s] += take;
        deficit -= take;
    }
    if (clamped) {
        warnings.push_back("some shards were short of their quota; "
                           "redistributed to lower shard ids");
    }
    if (deficit > 0) {
        warnings.push_back("k exceeds the pool size; selecting everything");
    }
    return quota;
}

}  // namespace

SelectionReport run_pipeline(const PipelineConfig& cfg) {
    cfg.validate();

    // Fail fast on unreadable inputs before any compute.
    for (const auto& path : cfg.raw_corpus) {
        if (!std::ifstream(path)) throw InputError("cannot open corpus file: " + path);
    }
    if (!std::ifstream(cfg.task_corpus)) {
        throw InputError("cannot open corpus file: " + cfg.task_corpus);
    }
    if (!std::ifstream(cfg.base_vocab)) {
        throw InputError("cannot open vocabulary file: " + cfg.base_vocab);
    }

    const fs::path out_dir(cfg.output_dir);
    fs::create_directories(out_dir);
    const unsigned threads = effective_threads(cfg.threads);
    const std::uint32_t shards = cfg.per_shard ? cfg.num_shards : 1;

    SelectionReport report;
    report.k_requested = cfg.k;
    StageCache cache(out_dir, cfg.use_cache);

    std::vector<std::string> task_texts;
    {
        StageTimer timer(report.timings, "ingest_task");
        task_texts = load_texts(cfg.task_corpus, cfg.strict, &report.task_stats);
        if (task_texts.empty()) throw InputError("task corpus has no documents");
    }

    // --- Vocabulary adaptation -------------------------------------------
    const std::string vocab_hash = vocab_stage_hash(cfg);
    const std::string vocab_path = (out_dir / "vocab.json").string();
    Vocabulary base_vocab;
    Vocabulary adapted;
    {
        StageTimer timer(report.timings, "vocab");
        bool reused = false;
        if (cache.fresh("vocab", vocab_hash) && fs::exists(vocab_path)) {
            try {
                adapted = load_vocabulary(vocab_path);
                base_vocab = load_vocabulary(cfg.base_vocab);
                reused = true;
            } catch (const InputError&) {
                reused = false;
            }
        }
        if (!reused) {
            VocabStage stage = build_vocab_stage(cfg, task_texts, report.warnings);
            base_vocab = std::move(stage.base);
            adapted = std::move(stage.adapted);
            save_vocabulary(adapted, vocab_path, "corepick run");
            if (!stage.trace.empty()) {
                save_prune_trace(stage.trace, (out_dir / "prune_trace.csv").string());
            }
            cache.update("vocab", vocab_hash);
        }
    }
    const TokenTrie trie(adapted);

    // --- Target distribution ---------------------------------------------
    std::uint64_t adapted_vocab_file_hash = hash_file(vocab_path);
    const std::string target_hash =
        hex64(hash_text(hash_text(hash_text(kFnvOffsetBasis, "target-v1"),
                                  hex64(adapted_vocab_file_hash) + ";" +
                                      hex64(hash_file(cfg.task_corpus))),
                        feature_params(cfg)));
    const std::string target_path = (out_dir / "target.bkdt").string();
    BucketDistribution target_dist;
    {
        StageTimer timer(report.timings, "target_distribution");
        bool reused = false;
        if (cache.fresh("target_dist", target_hash) && fs::exists(target_path)) {
            try {
                target_dist = load_distribution(target_path);
                reused = target_dist.num_buckets == cfg.features.num_buckets;
            } catch (const InputError&) {
                reused = false;
            }
        }
        if (!reused) {
            std::vector<BucketAccumulator> partials(
                threads, BucketAccumulator(cfg.features.num_buckets));
            parallel_slices(task_texts.size(), threads,
                            [&](unsigned w, std::size_t begin, std::size_t end) {
                                for (std::size_t i = begin; i < end; ++i) {
                                    partials[w].add(featurize(
                                        tokenize(task_texts[i], trie), cfg.features));
                                }
                            });
            BucketAccumulator acc(cfg.features.num_buckets);
            for (const auto& p : partials) acc.merge(p);
            target_dist = acc.finalize(cfg.alpha);
            save_distribution(target_dist, target_path, cfg.task_corpus,
                              acc.document_count());
            cache.update("target_dist", target_hash);
        }
    }

    // --- Raw distribution (first streaming pass) --------------------------
    std::uint64_t raw_files_hash = kFnvOffsetBasis;
    for (const auto& path : cfg.raw_corpus) {
        raw_files_hash = hash_text(raw_files_hash, hex64(hash_file(path)));
    }
    const std::string raw_hash = hex64(hash_text(
        hash_text(hash_text(hash_text(kFnvOffsetBasis, "raw-v1"),
                            hex64(adapted_vocab_file_hash)),
                  hex64(raw_files_hash) + ";" + std::to_string(shards) +
                      (cfg.strict ? ";strict" : ";lenient")),
        feature_params(cfg)));
    const std::string raw_path = (out_dir / "raw.bkdt").string();
    BucketDistribution raw_dist;
    report.per_shard_docs.assign(shards, 0);
    {
        StageTimer timer(report.timings, "raw_distribution");
        bool reused = false;
        if (cache.fresh("raw_dist", raw_hash) && fs::exists(raw_path)) {
            try {
                raw_dist = load_distribution(raw_path);
                const json data = cache.stage_data("raw_dist");
                report.pool_size = data.at("pool_size").get<std::uint64_t>();
                report.per_shard_docs =
                    data.at("per_shard").get<std::vector<std::uint64_t>>();
                report.raw_stats.lines = data.at("lines").get<std::uint64_t>();
                report.raw_stats.documents = report.pool_size;
                report.raw_stats.skipped_invalid =
                    data.at("skipped_invalid").get<std::uint64_t>();
                reused = raw_dist.num_buckets == cfg.features.num_buckets &&
                         report.per_shard_docs.size() == shards;
            } catch (const std::exception&) {
                reused = false;
            }
        }
        if (!reused) {
            report.per_shard_docs.assign(shards, 0);
            report.raw_stats = CorpusStats{};
            std::vector<BucketAccumulator> partials(
                threads, BucketAccumulator(cfg.features.num_buckets));
            std::uint64_t pool = 0;
            stream_corpus(cfg.raw_corpus, cfg.strict, &report.raw_stats,
                          [&](std::vector<Document>& chunk, std::uint64_t base) {
                parallel_slices(chunk.size(), threads,
                                [&](unsigned w, std::size_t begin, std::size_t end) {
                    for (std::size_t i = begin; i < end; ++i) {
                        partials[w].add(featurize(
                            tokenize(chunk[i].text, trie, chunk[i].id),
                            cfg.features));
                    }
                });
                for (std::size_t i = 0; i < chunk.size(); ++i) {
                    ++report.per_shard_docs[(base + i) % shards];
                }
                pool += chunk.size();
            });
            if (pool == 0) throw InputError("raw corpus has no documents");
            report.pool_size = pool;
            BucketAccumulator acc(cfg.features.num_buckets);
            for (const auto& p : partials) acc.merge(p);
            raw_dist = acc.finalize(cfg.alpha);
            save_distribution(raw_dist, raw_path,
                              cfg.raw_corpus.size() == 1 ? cfg.raw_corpus[0]
                                                         : "multiple files",
                              pool);
            cache.update("raw_dist", raw_hash,
                         json{{"pool_size", report.pool_size},
                              {"per_shard", report.per_shard_docs},
                              {"lines", report.raw_stats.lines},
                              {"skipped_invalid", report.raw_stats.skipped_invalid}});
        }
    }

    // --- Weights and selection (second streaming pass) --------------------
    const ImportanceModel model(target_dist, raw_dist);
    const auto quotas = compute_quotas(report.per_shard_docs,
                                       std::min<std::size_t>(cfg.k, report.pool_size),
                                       report.warnings);
    if (cfg.k > report.pool_size) report.warnings.push_back("k > pool size");
    const std::uint64_t baseline_seed = cfg.seed;  // random_select derives its own stream

    std::vector<std::string> selected_ids;
    std::unordered_set<std::string> selected_set;
    std::unordered_set<std::string> random_set;
    report.per_shard_selected.assign(shards, 0);
    {
        StageTimer timer(report.timings, "selection");
        std::vector<TopK> chosen;
        std::vector<TopK> baseline;
        chosen.reserve(shards);
        baseline.reserve(shards);
        for (std::uint32_t s = 0; s < shards; ++s) {
            chosen.emplace_back(quotas[s]);
            baseline.emplace_back(quotas[s]);
        }
        const std::uint64_t baseline_stream =
            derive_stream_seed(baseline_seed, "random-baseline");

        std::ofstream weights_out;
        if (cfg.emit_weights) {
            weights_out.open(out_dir / "weights.csv",
                             std::ios::binary | std::ios::trunc);
            if (!weights_out) throw InputError("cannot write weights.csv");
            weights_out << "doc_id,shard_id,log_weight\n";
            weights_out.precision(17);
        }

        stream_corpus(cfg.raw_corpus, cfg.strict, nullptr,
                      [&](std::vector<Document>& chunk, std::uint64_t base) {
            std::vector<double> weights(chunk.size(), 0.0);
            std::vector<std::vector<TopK>> local_chosen(
                threads, std::vector<TopK>());
            std::vector<std::vector<TopK>> local_baseline(
                threads, std::vector<TopK>());
            parallel_slices(chunk.size(), threads,
                            [&](unsigned w, std::size_t begin, std::size_t end) {
                auto& mine = local_chosen[w];
                auto& mine_base = local_baseline[w];
                for (std::uint32_t s = 0; s < shards; ++s) {
                    mine.emplace_back(quotas[s]);
                    mine_base.emplace_back(quotas[s]);
                }
                for (std::size_t i = begin; i < end; ++i) {
                    const auto& doc = chunk[i];
                    const std::uint32_t shard =
                        static_cast<std::uint32_t>((base + i) % shards);
                    const double lw = model.log_weight(featurize(
                        tokenize(doc.text, trie, doc.id), cfg.features));
                    weights[i] = lw;
                    mine[shard].push(lw + gumbel_noise(cfg.seed, doc.id), doc.id);
                    mine_base[shard].push(gumbel_noise(baseline_stream, doc.id),
                                          doc.id);
                }
            });
            for (unsigned w = 0; w < threads; ++w) {
                if (local_chosen[w].empty()) continue;
                for (std::uint32_t s = 0; s < shards; ++s) {
                    chosen[s].merge(std::move(local_chosen[w][s]));
                    baseline[s].merge(std::move(local_baseline[w][s]));
                }
            }
            if (cfg.emit_weights) {
                for (std::size_t i = 0; i < chunk.size(); ++i) {
                    weights_out << chunk[i].id << ',' << (base + i) % shards << ','
                                << weights[i] << '\n';
                }
            }
        });

        for (std::uint32_t s = 0; s < shards; ++s) {
            auto picked = std::move(chosen[s]).take_sorted();
            report.per_shard_selected[s] = picked.size();
            for (auto& [score, id] : picked) {
                selected_set.insert(id);
                selected_ids.push_back(std::move(id));
            }
            for (auto& [score, id] : std::move(baseline[s]).take_sorted()) {
                random_set.insert(std::move(id));
            }
        }
        report.k_achieved = selected_ids.size();

        std::ofstream ids_out(out_dir / "selected_ids.txt",
                              std::ios::binary | std::ios::trunc);
        if (!ids_out) throw InputError("cannot write selected_ids.txt");
        for (const auto& id : selected_ids) ids_out << id << '\n';
        if (!ids_out) throw InputError("failed writing selected_ids.txt");
    }

    // --- Selected / baseline distributions (third streaming pass) ---------
    BucketDistribution selected_dist;
    BucketDistribution random_dist;
    {
        StageTimer timer(report.timings, "selected_distribution");
        std::vector<BucketAccumulator> sel_partials(
            threads, BucketAccumulator(cfg.features.num_buckets));
        std::vector<BucketAccumulator> rand_partials(
            threads, BucketAccumulator(cfg.features.num_buckets));
        std::ofstream docs_out;
        if (cfg.emit_docs) {
            docs_out.open(out_dir / "selected_docs.jsonl",
                          std::ios::binary | std::ios::trunc);
            if (!docs_out) throw InputError("cannot write selected_docs.jsonl");
        }
        stream_corpus(cfg.raw_corpus, cfg.strict, nullptr,
                      [&](std::vector<Document>& chunk, std::uint64_t) {
            std::vector<char> picked(chunk.size(), 0);
            parallel_slices(chunk.size(), threads,
                            [&](unsigned w, std::size_t begin, std::size_t end) {
                for (std::size_t i = begin; i < end; ++i) {
                    const auto& doc = chunk[i];
                    const bool in_sel = selected_set.count(doc.id) > 0;
                    const bool in_rand = random_set.count(doc.id) > 0;
                    if (!in_sel && !in_rand) continue;
                    auto fv = featurize(tokenize(doc.text, trie, doc.id),
                                        cfg.features);
                    if (in_sel) {
                        sel_partials[w].add(fv);
                        picked[i] = 1;
                    }
                    if (in_rand) rand_partials[w].add(fv);
                }
            });
            if (cfg.emit_docs) {
                for (std::size_t i = 0; i < chunk.size(); ++i) {
                    if (picked[i] == 0) continue;
                    docs_out << json{{"id", chunk[i].id},
                                     {"text", chunk[i].text}}.dump()
                             << '\n';
                }
            }
        });
        BucketAccumulator sel_acc(cfg.features.num_buckets);
        BucketAccumulator rand_acc(cfg.features.num_buckets);
        for (const auto& p : sel_partials) sel_acc.merge(p);
        for (const auto& p : rand_partials) rand_acc.merge(p);
        selected_dist = sel_acc.finalize(cfg.alpha);
        random_dist = rand_acc.finalize(cfg.alpha);
        save_distribution(selected_dist, (out_dir / "selected.bkdt").string(),
                          "selected subset", sel_acc.document_count());
        save_distribution(random_dist, (out_dir / "random.bkdt").string(),
                          "random baseline", rand_acc.document_count());
    }

    // --- Metrics -----------------------------------------------------------
    {
        StageTimer timer(report.timings, "metrics");
        report.kl_target_selected = kl_divergence(target_dist, selected_dist);
        report.kl_target_random = kl_divergence(target_dist, random_dist);
        report.kl_reduction_nats =
            kl_reduction(target_dist, selected_dist, random_dist);

        const TokenTrie base_trie(base_vocab);
        std::vector<std::uint64_t> cand(task_texts.size(), 0);
        std::vector<std::uint64_t> ref(task_texts.size(), 0);
        parallel_slices(task_texts.size(), threads,
                        [&](unsigned, std::size_t begin, std::size_t end) {
                            for (std::size_t i = begin; i < end; ++i) {
                                cand[i] = token_count(task_texts[i], trie);
                                ref[i] = token_count(task_texts[i], base_trie);
                            }
                        });
        report.nsl_adapted_vs_base = nsl(cand, ref);
    }

    cache.save();
    save_report(report, cfg, (out_dir / "report.json").string());
    return report;
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) {
        throw ConfigError("pearson needs two equally sized lists of >= 2 points");
    }
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(x.size());
    my /= static_cast<double>(y.size());
    double sxy = 0.0;
    double sxx = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx <= 0.0 || syy <= 0.0) throw ConfigError("degenerate input");
    const double r = sxy / std::sqrt(sxx * syy);
    return std::clamp(r, -1.0, 1.0);
}

void save_report(const SelectionReport& report, const PipelineConfig& cfg,
                 const std::string& path) {
    json timings = json::object();
    for (const auto& t : report.timings) timings[t.stage] = t.millis;
    json doc = {
        {"config", config_echo(cfg)},
        {"pool",
         {{"documents", report.pool_size},
          {"per_shard", report.per_shard_docs},
          {"lines", report.raw_stats.lines},
          {"skipped_invalid", report.raw_stats.skipped_invalid}}},
        {"selection",
         {{"k_requested", report.k_requested},
          {"k_achieved", report.k_achieved},
          {"per_shard_selected", report.per_shard_selected}}},
        {"metrics",
         {{"kl_target_selected", report.kl_target_selected},
          {"kl_target_random", report.kl_target_random},
          {"kl_reduction", report.kl_reduction_nats},
          {"nsl_adapted_vs_base", report.nsl_adapted_vs_base}}},
        {"timings_ms", std::move(timings)},
        {"warnings", report.warnings},
    };
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write report: " + path);
    out << doc.dump(2) << '\n';
    if (!out) throw InputError("failed writing report: " + path);
}

}  // namespace corepick
