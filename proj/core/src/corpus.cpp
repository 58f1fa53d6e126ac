#include "corepick/corpus.hpp"

#include <fstream>

#include <json.hpp>

#include "corepick/errors.hpp"

namespace corepick {

void for_each_document(const std::string& path, bool strict,
                       const std::function<void(Document&&)>& fn,
                       CorpusStats* stats) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open corpus file: " + path);

    CorpusStats local;
    std::string line;
    std::uint64_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        ++local.lines;

        nlohmann::json obj = nlohmann::json::parse(line, nullptr, false);
        if (obj.is_discarded() || !obj.is_object() || !obj.contains("text") ||
            !obj["text"].is_string()) {
            if (strict) {
                throw InputError(path + ":" + std::to_string(line_no) +
                                 ": malformed document line");
            }
            ++local.skipped_invalid;
            continue;
        }
        Document doc;
        doc.text = obj["text"].get<std::string>();
        if (obj.contains("id") && obj["id"].is_string()) {
            doc.id = obj["id"].get<std::string>();
            // ids feed newline-delimited output files
            if (doc.id.find('\n') != std::string::npos ||
                doc.id.find('\r') != std::string::npos) {
                if (strict) {
                    throw InputError(path + ":" + std::to_string(line_no) +
                                     ": document id contains a line break");
                }
                ++local.skipped_invalid;
                continue;
            }
        } else {
            doc.id = path + ":" + std::to_string(line_no);
        }
        ++local.documents;
        fn(std::move(doc));
    }
    if (stats != nullptr) {
        stats->lines += local.lines;
        stats->documents += local.documents;
        stats->skipped_invalid += local.skipped_invalid;
    }
}

std::vector<Document> load_documents(const std::string& path, bool strict,
                                     CorpusStats* stats) {
    std::vector<Document> docs;
    for_each_document(path, strict,
                      [&](Document&& d) { docs.push_back(std::move(d)); }, stats);
    return docs;
}

std::vector<std::string> load_texts(const std::string& path, bool strict,
                                    CorpusStats* stats) {
    std::vector<std::string> texts;
    for_each_document(path, strict,
                      [&](Document&& d) { texts.push_back(std::move(d.text)); },
                      stats);
    return texts;
}

void write_documents_jsonl(const std::vector<Document>& docs,
                           const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write corpus file: " + path);
    for (const auto& doc : docs) {
        nlohmann::json obj = {{"id", doc.id}, {"text", doc.text}};
        out << obj.dump() << '\n';
    }
    if (!out) throw InputError("failed writing corpus file: " + path);
}

}  // namespace corepick
