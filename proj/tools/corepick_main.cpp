#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "corepick/corpus.hpp"
#include "corepick/distribution.hpp"
#include "corepick/errors.hpp"
#include "corepick/features.hpp"
#include "corepick/pipeline.hpp"
#include "corepick/sampler.hpp"
#include "corepick/tokenizer.hpp"
#include "corepick/vocab.hpp"

namespace {

using namespace corepick;

MergeStrategy make_strategy(const std::string& kind_name,
                            const std::vector<double>& mix_values,
                            const std::string& mix_preset) {
    const auto kind = merge_kind_from_string(kind_name);
    if (!kind.has_value()) {
        throw ConfigError("unknown merge strategy: " + kind_name);
    }
    MergeStrategy strategy;
    strategy.kind = *kind;
    if (!mix_values.empty()) {
        if (mix_values.size() != 3) {
            throw ConfigError("--mix needs three values: subword,word,multiword");
        }
        strategy.mix = GranularityMix{mix_values[0], mix_values[1], mix_values[2]};
    } else if (!mix_preset.empty()) {
        if (mix_preset == "word-heavy") {
            strategy.mix = kWordHeavyMix;
        } else if (mix_preset == "multiword-heavy") {
            strategy.mix = kMultiwordHeavyMix;
        } else {
            throw ConfigError("unknown mix preset: " + mix_preset +
                              " (expected word-heavy or multiword-heavy)");
        }
    }
    return strategy;
}

int cmd_learn_vocab(const std::string& task_path, const LearnConfig& learn,
                    bool strict, const std::string& out_path) {
    const auto texts = load_texts(task_path, strict);
    LearnStats stats;
    const Vocabulary vocab = learn_task_vocab(texts, learn, &stats);
    save_vocabulary(vocab, out_path, "learn-vocab " + task_path);
    std::cout << "learned " << vocab.size() << " tokens from " << stats.documents
              << " documents (" << stats.skipped_blank_documents
              << " blank skipped) -> " << out_path << "\n";
    return 0;
}

int cmd_merge_vocab(const std::string& base_path, const std::string& task_path,
                    const MergeStrategy& strategy, std::size_t fixed_ratio_size,
                    const std::string& out_path) {
    const Vocabulary base = load_vocabulary(base_path);
    const Vocabulary task = load_vocabulary(task_path);
    Vocabulary merged = merge_vocabs(base, task, strategy);
    if (strategy.mix.has_value()) {
        if (fixed_ratio_size == 0) {
            throw ConfigError("--size is required with a fixed-ratio mix");
        }
        merged = apply_fixed_ratio(merged, *strategy.mix, fixed_ratio_size);
    }
    save_vocabulary(merged, out_path,
                    "merge-vocab " + std::string(to_string(strategy.kind)));
    std::cout << "merged vocabulary: " << merged.size() << " tokens -> "
              << out_path << "\n";
    return 0;
}

int cmd_prune_vocab(const std::string& vocab_path, std::size_t target_size,
                    int steps, const std::string& trace_path,
                    const std::string& out_path) {
    Vocabulary vocab = load_vocabulary(vocab_path);
    vocab.normalize();
    PruneResult result = prune_vocab(vocab, target_size, steps);
    save_vocabulary(result.vocab, out_path, "prune-vocab " + vocab_path);
    if (!trace_path.empty()) save_prune_trace(result.trace, trace_path);
    std::cout << "pruned " << vocab.size() << " -> " << result.vocab.size()
              << " tokens in " << result.trace.size() << " steps, H_v = "
              << (result.trace.empty() ? vocab_utility(result.vocab)
                                       : result.trace.back().utility_nats)
              << " nats/char -> " << out_path << "\n";
    return 0;
}

int cmd_featurize(const std::string& vocab_path, const std::string& docs_path,
                  const FeatureConfig& features, bool strict,
                  const std::string& out_path) {
    const Vocabulary vocab = load_vocabulary(vocab_path);
    const TokenTrie trie(vocab);
    std::ofstream file;
    std::ostream* out = &std::cout;
    if (!out_path.empty()) {
        file.open(out_path, std::ios::binary | std::ios::trunc);
        if (!file) throw InputError("cannot write " + out_path);
        out = &file;
    }
    for_each_document(docs_path, strict, [&](Document&& doc) {
        write_feature_line(*out, featurize(tokenize(doc.text, trie, doc.id),
                                           features));
    });
    return 0;
}

int cmd_estimate(const std::string& vocab_path, const std::string& docs_path,
                 const FeatureConfig& features, double alpha, bool strict,
                 const std::string& out_path) {
    const Vocabulary vocab = load_vocabulary(vocab_path);
    const TokenTrie trie(vocab);
    BucketAccumulator acc(features.num_buckets);
    for_each_document(docs_path, strict, [&](Document&& doc) {
        acc.add(featurize(tokenize(doc.text, trie, doc.id), features));
    });
    const BucketDistribution dist = acc.finalize(alpha);
    save_distribution(dist, out_path, docs_path, acc.document_count());
    std::cout << "estimated distribution over " << acc.document_count()
              << " documents (" << acc.total() << " n-grams) -> " << out_path
              << "\n";
    return 0;
}

int cmd_select(const std::vector<std::string>& docs_paths,
               const std::string& vocab_path, const std::string& target_path,
               const std::string& raw_path, std::size_t k, std::uint64_t seed,
               std::uint32_t num_shards, bool global_pool, bool strict,
               const std::string& out_path, const std::string& emit_docs_path,
               const std::string& emit_weights_path) {
    const Vocabulary vocab = load_vocabulary(vocab_path);
    const TokenTrie trie(vocab);
    const BucketDistribution target = load_distribution(target_path);
    const BucketDistribution raw = load_distribution(raw_path);
    const ImportanceModel model(target, raw);
    FeatureConfig features;
    features.num_buckets = target.num_buckets;

    const std::uint32_t shards = global_pool ? 1 : num_shards;
    std::vector<WeightedDoc> docs;
    std::uint64_t index = 0;
    for (const auto& path : docs_paths) {
        for_each_document(path, strict, [&](Document&& doc) {
            const auto shard = static_cast<std::uint32_t>(index % shards);
            docs.push_back(WeightedDoc{
                std::move(doc.id),
                model.log_weight(featurize(tokenize(doc.text, trie), features)),
                shard});
            ++index;
        });
    }
    if (docs.empty()) throw InputError("no documents to select from");

    if (!emit_weights_path.empty()) {
        std::ofstream weights(emit_weights_path, std::ios::binary | std::ios::trunc);
        if (!weights) throw InputError("cannot write " + emit_weights_path);
        weights << "doc_id,shard_id,log_weight\n";
        weights.precision(17);
        for (const auto& d : docs) {
            weights << d.doc_id << ',' << d.shard_id << ',' << d.log_weight << '\n';
        }
    }

    std::vector<std::uint64_t> pool(shards, 0);
    for (const auto& d : docs) ++pool[d.shard_id];
    std::vector<std::string> warnings;
    std::vector<std::size_t> quotas(shards, std::min(k, docs.size()));
    if (shards > 1) {
        // mirror the pipeline's per-shard quota split
        const std::size_t want = std::min(k, docs.size());
        quotas.assign(shards, 0);
        for (std::uint32_t s = 0; s < shards; ++s) {
            quotas[s] = want / shards + (s < want % shards ? 1 : 0);
        }
    }

    std::vector<std::string> selected;
    for (std::uint32_t s = 0; s < shards; ++s) {
        std::vector<WeightedDoc> shard_docs;
        for (auto& d : docs) {
            if (d.shard_id == s) shard_docs.push_back(d);
        }
        if (shard_docs.empty() || quotas[s] == 0) continue;
        auto result = gumbel_topk(shard_docs, quotas[s], seed);
        for (auto& id : result.selected) selected.push_back(std::move(id));
    }

    std::ofstream file;
    std::ostream* out = &std::cout;
    if (!out_path.empty()) {
        file.open(out_path, std::ios::binary | std::ios::trunc);
        if (!file) throw InputError("cannot write " + out_path);
        out = &file;
    }
    for (const auto& id : selected) *out << id << '\n';

    if (!emit_docs_path.empty()) {
        std::unordered_set<std::string> wanted(selected.begin(), selected.end());
        std::ofstream docs_out(emit_docs_path, std::ios::binary | std::ios::trunc);
        if (!docs_out) throw InputError("cannot write " + emit_docs_path);
        for (const auto& path : docs_paths) {
            for_each_document(path, strict, [&](Document&& doc) {
                if (wanted.count(doc.id) > 0) {
                    docs_out << nlohmann::json{{"id", doc.id},
                                               {"text", doc.text}}.dump()
                             << '\n';
                }
            });
        }
    }
    return 0;
}

int cmd_nsl(const std::string& candidate_path, const std::string& reference_path,
            const std::string& docs_path, bool strict,
            const std::string& per_doc_path) {
    const TokenTrie candidate(load_vocabulary(candidate_path));
    const TokenTrie reference(load_vocabulary(reference_path));
    std::vector<std::uint64_t> cand;
    std::vector<std::uint64_t> ref;
    std::vector<std::string> ids;
    for_each_document(docs_path, strict, [&](Document&& doc) {
        cand.push_back(token_count(doc.text, candidate));
        ref.push_back(token_count(doc.text, reference));
        if (!per_doc_path.empty()) ids.push_back(std::move(doc.id));
    });
    const double value = nsl(cand, ref);
    if (!per_doc_path.empty()) {
        std::ofstream out(per_doc_path, std::ios::binary | std::ios::trunc);
        if (!out) throw InputError("cannot write " + per_doc_path);
        out << "doc_id,candidate_tokens,reference_tokens\n";
        for (std::size_t i = 0; i < ids.size(); ++i) {
            out << ids[i] << ',' << cand[i] << ',' << ref[i] << '\n';
        }
    }
    std::printf("%.6f\n", value);
    return 0;
}

int cmd_report(const std::vector<std::string>& reports,
               const std::string& correlate_path) {
    for (const auto& path : reports) {
        std::ifstream in(path);
        if (!in) throw InputError("cannot open report: " + path);
        nlohmann::json doc = nlohmann::json::parse(in, nullptr, false);
        if (doc.is_discarded() || !doc.is_object() || !doc.contains("metrics") ||
            !doc.contains("pool") || !doc.contains("selection")) {
            throw InputError("not a selection report: " + path);
        }
        const auto& metrics = doc["metrics"];
        std::cout << path << "\n"
                  << "  pool documents     " << doc["pool"]["documents"] << "\n"
                  << "  k achieved         " << doc["selection"]["k_achieved"] << "\n"
                  << "  KL(target||sel)    " << metrics["kl_target_selected"] << "\n"
                  << "  KL(target||rand)   " << metrics["kl_target_random"] << "\n"
                  << "  KL reduction       " << metrics["kl_reduction"] << "\n"
                  << "  NSL adapted/base   " << metrics["nsl_adapted_vs_base"] << "\n";
    }
    if (!correlate_path.empty()) {
        std::ifstream in(correlate_path);
        if (!in) throw InputError("cannot open csv: " + correlate_path);
        std::vector<double> x;
        std::vector<double> y;
        std::string line;
        while (std::getline(in, line)) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty()) continue;
            std::stringstream row(line);
            std::string a;
            std::string b;
            if (!std::getline(row, a, ',') || !std::getline(row, b, ',')) continue;
            try {
                const double xv = std::stod(a);
                const double yv = std::stod(b);
                x.push_back(xv);
                y.push_back(yv);
            } catch (...) {
                continue;  // header or junk line
            }
        }
        std::printf("pearson r = %.12f\n", pearson(x, y));
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"corpus selection by importance resampling over hashed "
                 "multi-granular n-gram features"};
    app.require_subcommand(1);

    // learn-vocab
    auto* learn_cmd = app.add_subcommand(
        "learn-vocab", "mine words and multi-words from a task corpus");
    std::string learn_task;
    std::string learn_out;
    LearnConfig learn_cfg;
    bool learn_strict = false;
    learn_cmd->add_option("--task", learn_task, "task corpus JSONL")->required();
    learn_cmd->add_option("--max-words", learn_cfg.max_words, "word budget");
    learn_cmd->add_option("--max-multiwords", learn_cfg.max_multiwords,
                          "multi-word budget");
    learn_cmd->add_option("--min-multiword-count", learn_cfg.min_multiword_count,
                          "occurrence threshold for multi-words");
    learn_cmd->add_flag("--strict", learn_strict, "fail on malformed lines");
    learn_cmd->add_option("--out", learn_out, "output vocabulary JSON")->required();

    // merge-vocab
    auto* merge_cmd = app.add_subcommand(
        "merge-vocab", "combine base and task vocabularies");
    std::string merge_base;
    std::string merge_task;
    std::string merge_kind = "multi-granular";
    std::vector<double> merge_mix;
    std::string merge_mix_preset;
    std::size_t merge_size = 0;
    std::string merge_out;
    merge_cmd->add_option("--base", merge_base, "base vocabulary JSON")->required();
    merge_cmd->add_option("--task", merge_task, "task vocabulary JSON")->required();
    merge_cmd->add_option("--strategy", merge_kind,
                          "multi-granular|merge-union|target-only|base-only|"
                          "multiword-only");
    merge_cmd->add_option("--mix", merge_mix,
                          "fixed-ratio shares: subword,word,multiword")
        ->delimiter(',');
    merge_cmd->add_option("--mix-preset", merge_mix_preset, "word-heavy|multiword-heavy");
    merge_cmd->add_option("--size", merge_size, "fixed-ratio target size");
    merge_cmd->add_option("--out", merge_out, "output vocabulary JSON")->required();

    // prune-vocab
    auto* prune_cmd = app.add_subcommand(
        "prune-vocab", "utility-guided vocabulary pruning");
    std::string prune_vocab_path;
    std::size_t prune_target = 10000;
    int prune_steps = 10;
    std::string prune_trace;
    std::string prune_out;
    prune_cmd->add_option("--vocab", prune_vocab_path, "vocabulary JSON")->required();
    prune_cmd->add_option("--target-size", prune_target, "final size");
    prune_cmd->add_option("--steps", prune_steps, "pruning rounds");
    prune_cmd->add_option("--trace", prune_trace, "per-step CSV trace");
    prune_cmd->add_option("--out", prune_out, "output vocabulary JSON")->required();

    // featurize
    auto* feat_cmd = app.add_subcommand(
        "featurize", "dump hashed n-gram features per document");
    std::string feat_vocab;
    std::string feat_docs;
    std::string feat_out;
    FeatureConfig feat_cfg;
    bool feat_strict = false;
    feat_cmd->add_option("--vocab", feat_vocab, "vocabulary JSON")->required();
    feat_cmd->add_option("--docs", feat_docs, "documents JSONL")->required();
    feat_cmd->add_option("--buckets", feat_cfg.num_buckets, "hash buckets");
    feat_cmd->add_option("--orders", feat_cfg.ngram_orders, "n-gram orders")
        ->delimiter(',');
    feat_cmd->add_flag("--strict", feat_strict, "fail on malformed lines");
    feat_cmd->add_option("--out", feat_out, "output TSV (default stdout)");

    // estimate
    auto* est_cmd = app.add_subcommand(
        "estimate", "estimate a smoothed bucket distribution");
    std::string est_vocab;
    std::string est_docs;
    std::string est_out;
    FeatureConfig est_cfg;
    double est_alpha = 0.01;
    bool est_strict = false;
    est_cmd->add_option("--vocab", est_vocab, "vocabulary JSON")->required();
    est_cmd->add_option("--docs", est_docs, "documents JSONL")->required();
    est_cmd->add_option("--buckets", est_cfg.num_buckets, "hash buckets");
    est_cmd->add_option("--orders", est_cfg.ngram_orders, "n-gram orders")
        ->delimiter(',');
    est_cmd->add_option("--alpha", est_alpha, "smoothing alpha");
    est_cmd->add_flag("--strict", est_strict, "fail on malformed lines");
    est_cmd->add_option("--out", est_out, "output .bkdt file")->required();

    // select
    auto* sel_cmd = app.add_subcommand(
        "select", "importance selection against estimated distributions");
    std::vector<std::string> sel_docs;
    std::string sel_vocab;
    std::string sel_target;
    std::string sel_raw;
    std::size_t sel_k = 0;
    std::uint64_t sel_seed = 0;
    std::uint32_t sel_shards = 16;
    bool sel_global = false;
    bool sel_strict = false;
    std::string sel_out;
    std::string sel_emit_docs;
    std::string sel_emit_weights;
    sel_cmd->add_option("--docs", sel_docs, "raw corpus JSONL")->required();
    sel_cmd->add_option("--vocab", sel_vocab, "vocabulary JSON")->required();
    sel_cmd->add_option("--target-dist", sel_target, "target .bkdt")->required();
    sel_cmd->add_option("--raw-dist", sel_raw, "raw .bkdt")->required();
    sel_cmd->add_option("-k,--k", sel_k, "documents to select")->required();
    sel_cmd->add_option("--seed", sel_seed, "64-bit seed");
    sel_cmd->add_option("--shards", sel_shards, "round-robin shard count");
    sel_cmd->add_flag("--global", sel_global, "one global pool instead of shards");
    sel_cmd->add_flag("--strict", sel_strict, "fail on malformed lines");
    sel_cmd->add_option("--out", sel_out, "selected ids file (default stdout)");
    sel_cmd->add_option("--emit-docs", sel_emit_docs, "write selected docs JSONL");
    sel_cmd->add_option("--emit-weights", sel_emit_weights, "write weights CSV");

    // run
    auto* run_cmd = app.add_subcommand("run", "end-to-end selection pipeline");
    run_cmd->set_config("--config", "", "TOML config file (flags override)");
    PipelineConfig run_cfg;
    std::string run_strategy = "multi-granular";
    std::vector<double> run_mix;
    std::string run_mix_preset;
    bool run_global = false;
    bool run_no_cache = false;
    run_cmd->add_option("--raw", run_cfg.raw_corpus, "raw corpus JSONL files")
        ->required();
    run_cmd->add_option("--task", run_cfg.task_corpus, "task corpus JSONL")
        ->required();
    run_cmd->add_option("--base-vocab", run_cfg.base_vocab, "base vocabulary JSON")
        ->required();
    run_cmd->add_option("--strategy", run_strategy,
                        "multi-granular|merge-union|target-only|base-only|"
                        "multiword-only");
    run_cmd->add_option("--mix", run_mix, "fixed-ratio shares")->delimiter(',');
    run_cmd->add_option("--mix-preset", run_mix_preset, "word-heavy|multiword-heavy");
    run_cmd->add_option("--vocab-size", run_cfg.target_vocab_size,
                        "target vocabulary size");
    run_cmd->add_option("--prune-steps", run_cfg.prune_steps, "pruning rounds");
    run_cmd->add_option("--buckets", run_cfg.features.num_buckets, "hash buckets");
    run_cmd->add_option("--orders", run_cfg.features.ngram_orders, "n-gram orders")
        ->delimiter(',');
    run_cmd->add_option("--alpha", run_cfg.alpha, "smoothing alpha");
    run_cmd->add_option("-k,--k", run_cfg.k, "documents to select")->required();
    run_cmd->add_option("--shards", run_cfg.num_shards, "shard count");
    run_cmd->add_flag("--global", run_global, "global selection pool");
    run_cmd->add_option("--seed", run_cfg.seed, "64-bit seed");
    run_cmd->add_option("--out", run_cfg.output_dir, "output directory")->required();
    run_cmd->add_option("--max-words", run_cfg.learn.max_words, "word budget");
    run_cmd->add_option("--max-multiwords", run_cfg.learn.max_multiwords,
                        "multi-word budget");
    run_cmd->add_option("--min-multiword-count", run_cfg.learn.min_multiword_count,
                        "multi-word occurrence threshold");
    run_cmd->add_option("--threads", run_cfg.threads, "worker threads (0 = auto)");
    run_cmd->add_flag("--strict", run_cfg.strict, "fail on malformed lines");
    run_cmd->add_flag("--emit-docs", run_cfg.emit_docs, "write selected docs JSONL");
    run_cmd->add_flag("--emit-weights", run_cfg.emit_weights, "write weights CSV");
    run_cmd->add_flag("--no-cache", run_no_cache, "ignore cached stage artifacts");

    // nsl
    auto* nsl_cmd = app.add_subcommand(
        "nsl", "normalized sequence length of one tokenizer against another");
    std::string nsl_candidate;
    std::string nsl_reference;
    std::string nsl_docs;
    std::string nsl_per_doc;
    bool nsl_strict = false;
    nsl_cmd->add_option("--candidate-vocab", nsl_candidate, "candidate vocabulary")
        ->required();
    nsl_cmd->add_option("--reference-vocab", nsl_reference, "reference vocabulary")
        ->required();
    nsl_cmd->add_option("--docs", nsl_docs, "documents JSONL")->required();
    nsl_cmd->add_option("--per-doc", nsl_per_doc, "per-document CSV");
    nsl_cmd->add_flag("--strict", nsl_strict, "fail on malformed lines");

    // report
    auto* rep_cmd = app.add_subcommand("report", "summarize report.json files");
    std::vector<std::string> rep_files;
    std::string rep_correlate;
    rep_cmd->add_option("files", rep_files, "report.json paths");
    rep_cmd->add_option("--correlate", rep_correlate,
                        "two-column CSV; print the Pearson correlation");

    try {
        app.parse(argc, argv);

        if (*learn_cmd) {
            return cmd_learn_vocab(learn_task, learn_cfg, learn_strict, learn_out);
        }
        if (*merge_cmd) {
            return cmd_merge_vocab(merge_base, merge_task,
                                   make_strategy(merge_kind, merge_mix,
                                                 merge_mix_preset),
                                   merge_size, merge_out);
        }
        if (*prune_cmd) {
            return cmd_prune_vocab(prune_vocab_path, prune_target, prune_steps,
                                   prune_trace, prune_out);
        }
        if (*feat_cmd) {
            return cmd_featurize(feat_vocab, feat_docs, feat_cfg, feat_strict,
                                 feat_out);
        }
        if (*est_cmd) {
            return cmd_estimate(est_vocab, est_docs, est_cfg, est_alpha,
                                est_strict, est_out);
        }
        if (*sel_cmd) {
            return cmd_select(sel_docs, sel_vocab, sel_target, sel_raw, sel_k,
                              sel_seed, sel_shards, sel_global, sel_strict,
                              sel_out, sel_emit_docs, sel_emit_weights);
        }
        if (*run_cmd) {
            run_cfg.strategy = make_strategy(run_strategy, run_mix, run_mix_preset);
            run_cfg.per_shard = !run_global;
            run_cfg.use_cache = !run_no_cache;
            const SelectionReport report = run_pipeline(run_cfg);
            std::cout << "selected " << report.k_achieved << " of "
                      << report.pool_size << " documents\n"
                      << "KL(target||selected) = " << report.kl_target_selected
                      << "\nKL(target||random)   = " << report.kl_target_random
                      << "\nKL reduction         = " << report.kl_reduction_nats
                      << "\nNSL adapted/base     = " << report.nsl_adapted_vs_base
                      << "\nreport: " << run_cfg.output_dir << "/report.json\n";
            for (const auto& w : report.warnings) {
                std::cerr << "warning: " << w << "\n";
            }
            return 0;
        }
        if (*nsl_cmd) {
            return cmd_nsl(nsl_candidate, nsl_reference, nsl_docs, nsl_strict,
                           nsl_per_doc);
        }
        if (*rep_cmd) {
            if (rep_files.empty() && rep_correlate.empty()) {
                throw ConfigError("report: nothing to do");
            }
            return cmd_report(rep_files, rep_correlate);
        }
        return 0;
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const InputError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return 2;
    } catch (const InternalError& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 3;
    }
}
