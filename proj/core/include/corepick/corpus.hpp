#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace corepick {

struct Document {
    std::string id;
    std::string text;
};

struct CorpusStats {
    std::uint64_t lines = 0;
    std::uint64_t documents = 0;
    std::uint64_t skipped_invalid = 0;  // unparseable or missing `text`
};

/// Streams documents out of a JSONL file: one object per line with a required
/// `text` field and an optional `id` (default "<path>:<line>", 1-based).
/// Invalid lines are counted and skipped; with `strict` they throw InputError
/// instead. An unreadable file always throws InputError.
void for_each_document(const std::string& path, bool strict,
                       const std::function<void(Document&&)>& fn,
                       CorpusStats* stats = nullptr);

/// Convenience wrapper that materializes the stream.
std::vector<Document> load_documents(const std::string& path, bool strict = false,
                                     CorpusStats* stats = nullptr);

/// Text bodies only (the shape learn_task_vocab and estimate_frequencies eat).
std::vector<std::string> load_texts(const std::string& path, bool strict = false,
                                    CorpusStats* stats = nullptr);

void write_documents_jsonl(const std::vector<Document>& docs,
                           const std::string& path);

}  // namespace corepick
