#include "fixcrew/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "fixcrew/lexer.hpp"
#include "fixcrew/util.hpp"

namespace fixcrew {

using nlohmann::json;

namespace {

std::vector<std::string> document_terms(const std::string& buggy_method,
                                        const std::string& buggy_line) {
    std::vector<std::string> terms = token_texts(buggy_method + "\n" + buggy_line);
    for (auto& t : terms) t = to_lower(t);
    return terms;
}

}  // namespace

std::vector<std::string> Bm25Index::query_terms(const BugInstance& query) {
    return document_terms(query.buggy_method, query.buggy_line);
}

std::vector<std::string> Bm25Index::dedupe_terms(const std::vector<std::string>& terms) {
    std::vector<std::string> distinct;
    std::unordered_set<std::string> seen;
    for (const auto& t : terms)
        if (seen.insert(t).second) distinct.push_back(t);
    return distinct;
}

Bm25Index Bm25Index::build(const std::vector<BugInstance>& corpus, Bm25Params params) {
    if (corpus.empty()) throw std::invalid_argument("cannot build index over an empty corpus");
    Bm25Index index;
    index.params_ = params;
    index.corpus_hash_ = corpus_content_hash(corpus);

    std::size_t total_len = 0;
    for (const auto& x : corpus) {
        if (!index.id_to_idx_.emplace(x.id, index.docs_.size()).second)
            throw std::invalid_argument("duplicate instance id in corpus: " + x.id);
        auto terms = document_terms(x.buggy_method, x.buggy_line);
        std::map<std::string, std::size_t> tf;
        for (const auto& t : terms) ++tf[t];
        const std::size_t idx = index.docs_.size();
        for (const auto& [term, count] : tf) {
            index.postings_[term].emplace_back(idx, count);
            ++index.df_[term];
        }
        index.docs_.push_back({x.id, x.repo, x.buggy_method, x.buggy_line, x.fixed_line,
                               terms.size()});
        index.doc_len_.push_back(terms.size());
        index.repos_.insert(x.repo);
        total_len += terms.size();
    }
    index.avgdl_ = static_cast<double>(total_len) / static_cast<double>(index.docs_.size());
    return index;
}

std::size_t Bm25Index::doc_index(const std::string& doc_id) const {
    auto it = id_to_idx_.find(doc_id);
    if (it == id_to_idx_.end()) throw std::invalid_argument("unknown doc_id: " + doc_id);
    return it->second;
}

std::size_t Bm25Index::doc_frequency(const std::string& term) const {
    auto it = df_.find(term);
    return it == df_.end() ? 0 : it->second;
}

std::size_t Bm25Index::term_frequency(const std::string& term, const std::string& doc_id) const {
    auto it = postings_.find(term);
    if (it == postings_.end()) return 0;
    const std::size_t idx = doc_index(doc_id);
    const auto& list = it->second;
    auto pos = std::lower_bound(list.begin(), list.end(), idx,
                                [](const auto& p, std::size_t v) { return p.first < v; });
    return (pos != list.end() && pos->first == idx) ? pos->second : 0;
}

std::size_t Bm25Index::doc_length(const std::string& doc_id) const {
    return doc_len_[doc_index(doc_id)];
}

double Bm25Index::score_for_doc(const std::vector<std::string>& distinct_terms,
                                std::size_t idx) const {
    const double N = static_cast<double>(docs_.size());
    const double dl = static_cast<double>(doc_len_[idx]);
    double sum = 0.0;
    for (const auto& term : distinct_terms) {
        auto pit = postings_.find(term);
        if (pit == postings_.end()) continue;
        const auto& list = pit->second;
        auto pos = std::lower_bound(list.begin(), list.end(), idx,
                                    [](const auto& p, std::size_t v) { return p.first < v; });
        if (pos == list.end() || pos->first != idx) continue;
        const double tf = static_cast<double>(pos->second);
        const double n = static_cast<double>(df_.at(term));
        const double idf = std::log((N - n + 0.5) / (n + 0.5) + 1.0);
        const double norm = 1.0 - params_.b + params_.b * dl / avgdl_;
        sum += idf * (tf * (params_.k1 + 1.0)) / (tf + params_.k1 * norm);
    }
    return sum;
}

double Bm25Index::score(const std::vector<std::string>& query_terms,
                        const std::string& doc_id) const {
    return score_for_doc(dedupe_terms(query_terms), doc_index(doc_id));
}

std::vector<Demonstration> Bm25Index::top_k(const BugInstance& query, std::size_t k) const {
    if (k < 1) throw std::invalid_argument("k must be >= 1");
    const auto distinct = dedupe_terms(query_terms(query));
    std::vector<Demonstration> candidates;
    candidates.reserve(docs_.size());
    for (std::size_t idx = 0; idx < docs_.size(); ++idx) {
        if (docs_[idx].id == query.id) continue;  // no self-retrieval
        candidates.push_back({docs_[idx].id, docs_[idx].buggy_method, docs_[idx].buggy_line,
                              docs_[idx].fixed_line, score_for_doc(distinct, idx)});
    }
    std::sort(candidates.begin(), candidates.end(), [](const auto& a, const auto& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.instance_id < b.instance_id;
    });
    if (candidates.size() > k) candidates.resize(k);
    return candidates;
}

namespace {
constexpr int kCacheVersion = 1;
}

void Bm25Index::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write index cache: " + path.string());
    json header{{"version", kCacheVersion},
                {"n", docs_.size()},
                {"avgdl", avgdl_},
                {"k1", params_.k1},
                {"b", params_.b},
                {"corpus_hash", hex64(corpus_hash_)}};
    out << header.dump() << '\n';
    for (const auto& d : docs_) {
        json j{{"id", d.id},
               {"repo", d.repo},
               {"buggy_method", d.buggy_method},
               {"buggy_line", d.buggy_line},
               {"fixed_line", d.fixed_line},
               {"len", d.length}};
        out << j.dump() << '\n';
    }
    // postings in sorted term order so the cache file is reproducible
    std::map<std::string, const std::vector<std::pair<std::size_t, std::size_t>>*> sorted;
    for (const auto& [term, list] : postings_) sorted[term] = &list;
    for (const auto& [term, list] : sorted) {
        json entries = json::array();
        for (const auto& [idx, tf] : *list) entries.push_back({idx, tf});
        json j{{"term", term}, {"df", df_.at(term)}, {"postings", entries}};
        out << j.dump() << '\n';
    }
}

std::optional<Bm25Index> Bm25Index::load(const std::filesystem::path& path,
                                         std::uint64_t expected_corpus_hash) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    std::string line;
    if (!std::getline(in, line)) return std::nullopt;
    json header = json::parse(line, nullptr, false);
    if (header.is_discarded() || !header.is_object()) return std::nullopt;
    if (header.value("version", -1) != kCacheVersion) return std::nullopt;
    if (header.value("corpus_hash", "") != hex64(expected_corpus_hash)) return std::nullopt;

    Bm25Index index;
    index.params_ = {header.at("k1").get<double>(), header.at("b").get<double>()};
    index.avgdl_ = header.at("avgdl").get<double>();
    index.corpus_hash_ = expected_corpus_hash;
    const std::size_t n = header.at("n").get<std::size_t>();
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::getline(in, line)) return std::nullopt;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded()) return std::nullopt;
        DocEntry d{j.at("id").get<std::string>(),
                   j.at("repo").get<std::string>(),
                   j.at("buggy_method").get<std::string>(),
                   j.at("buggy_line").get<std::string>(),
                   j.at("fixed_line").get<std::string>(),
                   j.at("len").get<std::size_t>()};
        index.id_to_idx_.emplace(d.id, index.docs_.size());
        index.repos_.insert(d.repo);
        index.doc_len_.push_back(d.length);
        index.docs_.push_back(std::move(d));
    }
    while (std::getline(in, line)) {
        if (is_blank(line)) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded()) return std::nullopt;
        const auto term = j.at("term").get<std::string>();
        index.df_[term] = j.at("df").get<std::size_t>();
        auto& list = index.postings_[term];
        for (const auto& e : j.at("postings"))
            list.emplace_back(e.at(0).get<std::size_t>(), e.at(1).get<std::size_t>());
    }
    return index;
}

}  // namespace fixcrew
