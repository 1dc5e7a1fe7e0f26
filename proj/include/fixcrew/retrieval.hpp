#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "fixcrew/corpus.hpp"

namespace fixcrew {

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
};

// A retrieved bug-fix pair plus its BM25 score against the query.
struct Demonstration {
    std::string instance_id;
    std::string buggy_method;
    std::string buggy_line;
    std::string fixed_line;
    double score = 0.0;
};

// Immutable Okapi BM25 inverted index over a training corpus. Documents are
// buggy_method + "\n" + buggy_line, terms are lowercased lexer tokens.
// Safe to share across threads after build().
class Bm25Index {
public:
    static Bm25Index build(const std::vector<BugInstance>& corpus, Bm25Params params = {});

    // IDF(t) = ln((N - n + 0.5) / (n + 0.5) + 1); summed over distinct query
    // terms in first-occurrence order (score equality tests rely on the
    // exact arithmetic path).
    double score(const std::vector<std::string>& query_terms, const std::string& doc_id) const;

    // k highest-scoring demonstrations for the query, ties broken by
    // ascending instance_id; the query's own id is never returned.
    std::vector<Demonstration> top_k(const BugInstance& query, std::size_t k = 3) const;

    static std::vector<std::string> query_terms(const BugInstance& query);

    std::size_t doc_count() const { return doc_len_.size(); }
    double avgdl() const { return avgdl_; }
    const Bm25Params& params() const { return params_; }
    std::uint64_t corpus_hash() const { return corpus_hash_; }

    std::size_t doc_frequency(const std::string& term) const;
    std::size_t term_frequency(const std::string& term, const std::string& doc_id) const;
    std::size_t doc_length(const std::string& doc_id) const;
    bool contains_repo(const std::string& repo) const { return repos_.count(repo) > 0; }
    bool contains_id(const std::string& id) const { return id_to_idx_.count(id) > 0; }

    // versioned on-disk cache; load returns nullopt on version or corpus
    // hash mismatch
    void save(const std::filesystem::path& path) const;
    static std::optional<Bm25Index> load(const std::filesystem::path& path,
                                         std::uint64_t expected_corpus_hash);

private:
    struct DocEntry {
        std::string id;
        std::string repo;
        std::string buggy_method;
        std::string buggy_line;
        std::string fixed_line;
        std::size_t length = 0;
    };

    std::size_t doc_index(const std::string& doc_id) const;
    double score_for_doc(const std::vector<std::string>& distinct_terms, std::size_t idx) const;
    static std::vector<std::string> dedupe_terms(const std::vector<std::string>& terms);

    Bm25Params params_;
    double avgdl_ = 0.0;
    std::uint64_t corpus_hash_ = 0;
    std::vector<DocEntry> docs_;
    std::vector<std::size_t> doc_len_;
    std::unordered_map<std::string, std::size_t> id_to_idx_;
    std::unordered_map<std::string, std::vector<std::pair<std::size_t, std::size_t>>> postings_;
    std::unordered_map<std::string, std::size_t> df_;
    std::unordered_set<std::string> repos_;
};

}  // namespace fixcrew
