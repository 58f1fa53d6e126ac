#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include <doctest.h>

#include "corepick/errors.hpp"
#include "corepick/pipeline.hpp"
#include "test_util.hpp"

using namespace corepick;
using testutil::TempDir;

namespace {

/// Writes a two-domain synthetic corpus: ids are stable, texts are
/// space-joined tokens drawn from either the A-heavy or B-heavy distribution.
void write_two_domain_corpus(const std::string& path, int docs, bool target_only_a,
                             std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> heavy(0, 9);
    std::uniform_int_distribution<int> any(0, 29);
    std::uniform_int_distribution<int> len(15, 30);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    for (int d = 0; d < docs; ++d) {
        const bool domain_a = target_only_a || d % 2 == 0;
        std::string text;
        const int n = len(rng);
        for (int i = 0; i < n; ++i) {
            int tok;
            if (unif(rng) < 0.8) {
                tok = heavy(rng) + (domain_a ? 0 : 10);
            } else {
                tok = any(rng);
            }
            if (i > 0) text += ' ';
            text += "tok" + std::to_string(tok);
        }
        out << "{\"id\":\"" << (target_only_a ? "t" : "r") << d
            << "\",\"text\":\"" << text << "\"}\n";
    }
}

void write_base_vocab(const std::string& path) {
    std::ostringstream tokens;
    tokens << "{\"tokens\":[";
    bool first = true;
    const std::string chars = "abcdefghijklmnopqrstuvwxyz0123456789 ";
    for (char c : chars) {
        if (!first) tokens << ',';
        first = false;
        const std::string text = c == ' ' ? " " : std::string(1, c);
        tokens << "{\"text\":\"" << text
               << "\",\"granularity\":\"subword\",\"freq\":0.01}";
    }
    tokens << "],\"meta\":{\"source\":\"test\",\"size\":37}}";
    testutil::write_file(path, tokens.str());
}

PipelineConfig small_config(const TempDir& dir, const std::string& out_name) {
    PipelineConfig cfg;
    cfg.raw_corpus = {dir.file("raw.jsonl")};
    cfg.task_corpus = dir.file("task.jsonl");
    cfg.base_vocab = dir.file("base.json");
    cfg.strategy = {MergeKind::kMultiGranular, std::nullopt};
    cfg.target_vocab_size = 80;
    cfg.prune_steps = 4;
    cfg.features.num_buckets = 512;
    cfg.features.ngram_orders = {1, 2};
    cfg.alpha = 0.01;
    cfg.k = 64;
    cfg.num_shards = 16;
    cfg.seed = 7;
    cfg.output_dir = dir.file(out_name);
    cfg.learn.max_words = 40;
    cfg.learn.max_multiwords = 10;
    cfg.learn.min_multiword_count = 5;
    cfg.threads = 1;
    cfg.use_cache = false;
    return cfg;
}

void write_fixture(const TempDir& dir) {
    write_two_domain_corpus(dir.file("raw.jsonl"), 640, false, 11);
    write_two_domain_corpus(dir.file("task.jsonl"), 60, true, 22);
    write_base_vocab(dir.file("base.json"));
}

}  // namespace

TEST_CASE("pearson golden values") {
    CHECK(pearson({1, 2, 3}, {3, 5, 7}) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(pearson({1, 2, 3}, {-1, -2, -3}) ==
          doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(pearson({1, 2, 3}, {1, 3, 2}) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("pearson rejects degenerate input") {
    CHECK_THROWS_AS(pearson({1}, {1}), ConfigError);
    CHECK_THROWS_AS(pearson({1, 2}, {1, 2, 3}), ConfigError);
    CHECK_THROWS_WITH_AS(pearson({2, 2, 2}, {1, 2, 3}), "degenerate input",
                         ConfigError);
}

TEST_CASE("pipeline config validation") {
    PipelineConfig cfg;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.raw_corpus = {"raw.jsonl"};
    cfg.task_corpus = "task.jsonl";
    cfg.base_vocab = "base.json";
    cfg.output_dir = "out";
    CHECK_THROWS_AS(cfg.validate(), ConfigError);  // k missing
    cfg.k = 10;
    CHECK_NOTHROW(cfg.validate());
    cfg.alpha = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("pipeline fails fast on unreadable inputs") {
    TempDir dir("pipe");
    PipelineConfig cfg = small_config(dir, "out");
    CHECK_THROWS_AS(run_pipeline(cfg), InputError);
}

TEST_CASE("pipeline end to end on a small two-domain corpus") {
    TempDir dir("pipe");
    write_fixture(dir);
    PipelineConfig cfg = small_config(dir, "out");
    cfg.emit_docs = true;
    cfg.emit_weights = true;

    const SelectionReport report = run_pipeline(cfg);

    CHECK(report.pool_size == 640);
    CHECK(report.per_shard_docs.size() == 16);
    for (auto n : report.per_shard_docs) CHECK(n == 40);  // round robin
    CHECK(report.k_achieved == 64);
    CHECK(report.per_shard_selected ==
          std::vector<std::uint64_t>(16, 4));  // 64/16 per shard

    // the report's reduction field is exactly the difference of its KL fields
    CHECK(report.kl_reduction_nats ==
          report.kl_target_random - report.kl_target_selected);
    // a target-matched selection beats random on this corpus
    CHECK(report.kl_reduction_nats > 0.0);
    // the adapted tokenizer compresses the task corpus
    CHECK(report.nsl_adapted_vs_base < 1.0);

    namespace fs = std::filesystem;
    CHECK(fs::exists(cfg.output_dir + "/vocab.json"));
    CHECK(fs::exists(cfg.output_dir + "/target.bkdt"));
    CHECK(fs::exists(cfg.output_dir + "/raw.bkdt"));
    CHECK(fs::exists(cfg.output_dir + "/selected.bkdt"));
    CHECK(fs::exists(cfg.output_dir + "/random.bkdt"));
    CHECK(fs::exists(cfg.output_dir + "/selected_ids.txt"));
    CHECK(fs::exists(cfg.output_dir + "/report.json"));
    CHECK(fs::exists(cfg.output_dir + "/selected_docs.jsonl"));
    CHECK(fs::exists(cfg.output_dir + "/weights.csv"));

    // ids file has exactly k lines, all unique
    std::ifstream ids(cfg.output_dir + "/selected_ids.txt");
    std::set<std::string> seen;
    std::string line;
    while (std::getline(ids, line)) seen.insert(line);
    CHECK(seen.size() == 64);

    // emitted docs match the id list
    const auto docs = load_documents(cfg.output_dir + "/selected_docs.jsonl");
    CHECK(docs.size() == 64);
    for (const auto& d : docs) CHECK(seen.count(d.id) == 1);

    // weights csv covers the whole pool with finite weights
    std::ifstream weights(cfg.output_dir + "/weights.csv");
    std::getline(weights, line);
    CHECK(line == "doc_id,shard_id,log_weight");
    int rows = 0;
    while (std::getline(weights, line)) ++rows;
    CHECK(rows == 640);
}

TEST_CASE("pipeline determinism across runs and thread counts") {
    TempDir dir("pipe");
    write_fixture(dir);

    std::vector<std::string> id_files;
    std::vector<SelectionReport> reports;
    int run = 0;
    for (unsigned threads : {1u, 2u, 1u}) {
        PipelineConfig cfg = small_config(dir, "out" + std::to_string(run++));
        cfg.threads = threads;
        reports.push_back(run_pipeline(cfg));
        id_files.push_back(
            testutil::read_file(cfg.output_dir + "/selected_ids.txt"));
    }
    CHECK(id_files[0] == id_files[1]);
    CHECK(id_files[0] == id_files[2]);
    CHECK(reports[0].kl_target_selected == reports[1].kl_target_selected);
    CHECK(reports[0].kl_target_random == reports[1].kl_target_random);
    CHECK(reports[0].kl_reduction_nats == reports[1].kl_reduction_nats);
    CHECK(reports[0].nsl_adapted_vs_base == reports[1].nsl_adapted_vs_base);
    CHECK(reports[0].per_shard_docs == reports[1].per_shard_docs);
}

TEST_CASE("document weights do not depend on the shard count") {
    TempDir dir("pipe");
    write_fixture(dir);

    auto weights_of = [&](std::uint32_t shards, const std::string& out) {
        PipelineConfig cfg = small_config(dir, out);
        cfg.num_shards = shards;
        cfg.emit_weights = true;
        run_pipeline(cfg);
        std::map<std::string, std::string> weights;
        std::ifstream in(cfg.output_dir + "/weights.csv");
        std::string line;
        std::getline(in, line);
        while (std::getline(in, line)) {
            const auto first = line.find(',');
            const auto last = line.rfind(',');
            weights[line.substr(0, first)] = line.substr(last + 1);
        }
        return weights;
    };

    const auto w4 = weights_of(4, "out4");
    const auto w16 = weights_of(16, "out16");
    REQUIRE(w4.size() == w16.size());
    CHECK(w4 == w16);
}

TEST_CASE("k equal to pool size selects everything and matches raw") {
    TempDir dir("pipe");
    write_two_domain_corpus(dir.file("raw.jsonl"), 96, false, 31);
    write_two_domain_corpus(dir.file("task.jsonl"), 30, true, 32);
    write_base_vocab(dir.file("base.json"));

    PipelineConfig cfg = small_config(dir, "out");
    cfg.k = 96;
    const SelectionReport report = run_pipeline(cfg);
    CHECK(report.k_achieved == 96);
    // selecting the whole pool reproduces the raw distribution exactly
    CHECK(report.kl_target_selected ==
          kl_divergence(load_distribution(cfg.output_dir + "/target.bkdt"),
                        load_distribution(cfg.output_dir + "/raw.bkdt")));
}

TEST_CASE("k beyond the pool truncates with a warning") {
    TempDir dir("pipe");
    write_two_domain_corpus(dir.file("raw.jsonl"), 10, false, 41);
    write_two_domain_corpus(dir.file("task.jsonl"), 30, true, 42);
    write_base_vocab(dir.file("base.json"));

    PipelineConfig cfg = small_config(dir, "out");
    cfg.num_shards = 16;  // more shards than documents, some stay empty
    cfg.k = 20;
    const SelectionReport report = run_pipeline(cfg);
    CHECK(report.k_achieved == 10);
    CHECK(!report.warnings.empty());
}

TEST_CASE("global selection mode uses one pool") {
    TempDir dir("pipe");
    write_fixture(dir);
    PipelineConfig cfg = small_config(dir, "out");
    cfg.per_shard = false;
    const SelectionReport report = run_pipeline(cfg);
    CHECK(report.per_shard_docs.size() == 1);
    CHECK(report.k_achieved == 64);
}

TEST_CASE("stage cache reuses artifacts on identical reruns") {
    TempDir dir("pipe");
    write_fixture(dir);
    PipelineConfig cfg = small_config(dir, "out");
    cfg.use_cache = true;

    run_pipeline(cfg);
    const std::string first = testutil::read_file(cfg.output_dir + "/selected_ids.txt");
    CHECK(std::filesystem::exists(cfg.output_dir + "/manifest.json"));

    // mtime of the vocab artifact should survive the second run untouched
    const auto stamp =
        std::filesystem::last_write_time(cfg.output_dir + "/vocab.json");
    run_pipeline(cfg);
    CHECK(std::filesystem::last_write_time(cfg.output_dir + "/vocab.json") ==
          stamp);
    CHECK(testutil::read_file(cfg.output_dir + "/selected_ids.txt") == first);

    // changing the seed invalidates nothing cached but changes the selection
    cfg.seed = 8;
    run_pipeline(cfg);
    CHECK(testutil::read_file(cfg.output_dir + "/selected_ids.txt") != first);
}

TEST_CASE("pipeline handles every merge strategy") {
    TempDir dir("pipe");
    write_fixture(dir);

    for (MergeKind kind : {MergeKind::kMergeUnion, MergeKind::kTargetOnly,
                           MergeKind::kBaseOnly}) {
        PipelineConfig cfg =
            small_config(dir, "out_" + std::string(to_string(kind)));
        cfg.strategy = {kind, std::nullopt};
        const SelectionReport report = run_pipeline(cfg);
        CHECK(report.k_achieved == 64);
        CHECK(std::isfinite(report.kl_target_selected));
    }

    // fixed-ratio multi-granular goes through the per-granularity trim
    PipelineConfig cfg = small_config(dir, "out_mix");
    cfg.strategy = {MergeKind::kMultiGranular, GranularityMix{0.6, 0.3, 0.1}};
    const SelectionReport report = run_pipeline(cfg);
    CHECK(report.k_achieved == 64);
    const Vocabulary adapted = load_vocabulary(cfg.output_dir + "/vocab.json");
    CHECK(adapted.size() <= 80);
}

TEST_CASE("raw corpus may span multiple files with one global doc index") {
    TempDir dir("pipe");
    write_two_domain_corpus(dir.file("raw.jsonl"), 100, false, 51);
    // second file gets distinct ids by reusing the target generator prefix
    write_two_domain_corpus(dir.file("raw2.jsonl"), 60, true, 52);
    write_two_domain_corpus(dir.file("task.jsonl"), 30, true, 53);
    write_base_vocab(dir.file("base.json"));

    PipelineConfig cfg = small_config(dir, "out");
    cfg.raw_corpus = {dir.file("raw.jsonl"), dir.file("raw2.jsonl")};
    cfg.num_shards = 16;
    cfg.k = 32;
    const SelectionReport report = run_pipeline(cfg);
    CHECK(report.pool_size == 160);
    // 160 docs round-robin over 16 shards, the index runs across files
    CHECK(report.per_shard_docs == std::vector<std::uint64_t>(16, 10));

    std::ifstream ids(cfg.output_dir + "/selected_ids.txt");
    std::string line;
    bool from_first = false;
    bool from_second = false;
    while (std::getline(ids, line)) {
        if (line[0] == 'r') from_first = true;
        if (line[0] == 't') from_second = true;
    }
    CHECK(from_first);
    CHECK(from_second);
}

TEST_CASE("merge strategy validation in the pipeline config") {
    PipelineConfig cfg;
    cfg.raw_corpus = {"raw.jsonl"};
    cfg.task_corpus = "task.jsonl";
    cfg.base_vocab = "base.json";
    cfg.output_dir = "out";
    cfg.k = 1;
    cfg.strategy = {MergeKind::kMergeUnion, GranularityMix{0.6, 0.3, 0.1}};
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("report json carries the metric fields and config echo") {
    TempDir dir("pipe");
    write_fixture(dir);
    PipelineConfig cfg = small_config(dir, "out");
    const SelectionReport report = run_pipeline(cfg);

    const std::string text = testutil::read_file(cfg.output_dir + "/report.json");
    CHECK(text.find("kl_target_selected") != std::string::npos);
    CHECK(text.find("kl_reduction") != std::string::npos);
    CHECK(text.find("nsl_adapted_vs_base") != std::string::npos);
    CHECK(text.find("multi-granular") != std::string::npos);
    CHECK(text.find("\"seed\": 7") != std::string::npos);
    CHECK(report.timings.size() >= 5);
}
