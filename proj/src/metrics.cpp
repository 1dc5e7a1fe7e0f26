#include "fixcrew/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "fixcrew/lexer.hpp"
#include "fixcrew/util.hpp"

namespace fixcrew {

using nlohmann::json;

bool exact_match(std::string_view candidate, std::string_view reference) {
    return token_texts(candidate) == token_texts(reference);
}

namespace {

std::map<std::string, std::size_t> ngram_counts(const std::vector<std::string>& tokens,
                                                std::size_t n) {
    std::map<std::string, std::size_t> counts;
    if (tokens.size() < n) return counts;
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
        std::string key;
        for (std::size_t j = 0; j < n; ++j) {
            key += tokens[i + j];
            key += '\x1f';
        }
        ++counts[key];
    }
    return counts;
}

}  // namespace

double bleu4(std::string_view candidate, std::string_view reference) {
    const auto cand = token_texts(candidate);
    const auto ref = token_texts(reference);
    if (cand.empty()) return 0.0;

    double log_sum = 0.0;
    for (std::size_t n = 1; n <= 4; ++n) {
        const auto cg = ngram_counts(cand, n);
        const auto rg = ngram_counts(ref, n);
        const std::size_t total = cand.size() >= n ? cand.size() - n + 1 : 0;
        std::size_t matched = 0;
        for (const auto& [gram, count] : cg) {
            auto it = rg.find(gram);
            if (it != rg.end()) matched += std::min(count, it->second);
        }
        double p;
        if (n == 1) {
            if (matched == 0) return 0.0;
            p = static_cast<double>(matched) / static_cast<double>(total);
        } else if (matched == 0) {
            p = 1.0 / static_cast<double>(total + 1);
        } else {
            p = static_cast<double>(matched) / static_cast<double>(total);
        }
        log_sum += 0.25 * std::log(p);
    }
    const double c = static_cast<double>(cand.size());
    const double r = static_cast<double>(ref.size());
    const double bp = c > r ? 1.0 : std::exp(1.0 - r / c);
    return bp * std::exp(log_sum);
}

std::size_t levenshtein_tokens(std::span<const std::string> a, std::span<const std::string> b) {
    const std::size_t m = a.size(), n = b.size();
    std::vector<std::size_t> row(n + 1);
    for (std::size_t j = 0; j <= n; ++j) row[j] = j;
    for (std::size_t i = 1; i <= m; ++i) {
        std::size_t prev = row[0];
        row[0] = i;
        for (std::size_t j = 1; j <= n; ++j) {
            const std::size_t old = row[j];
            const std::size_t sub = prev + (a[i - 1] == b[j - 1] ? 0 : 1);
            row[j] = std::min({sub, row[j] + 1, row[j - 1] + 1});
            prev = old;
        }
    }
    return row[n];
}

std::size_t levenshtein(std::string_view candidate, std::string_view reference) {
    const auto a = token_texts(candidate);
    const auto b = token_texts(reference);
    return levenshtein_tokens(a, b);
}

namespace {

// exact half-up rounding of 100*fixed/n to 2 decimals, in integer arithmetic
double percentage_2dp(std::size_t fixed, std::size_t n) {
    const unsigned long long scaled = (20000ull * fixed + n) / (2ull * n);
    return static_cast<double>(scaled) / 100.0;
}

}  // namespace

double fix_at_k(const std::vector<std::pair<std::string, std::vector<std::string>>>& results,
                std::size_t k) {
    if (k < 1) throw std::invalid_argument("k must be >= 1");
    if (results.empty()) throw std::invalid_argument("fix_at_k over empty results");
    std::size_t fixed = 0;
    for (const auto& [reference, candidates] : results) {
        const std::size_t limit = std::min(k, candidates.size());
        for (std::size_t i = 0; i < limit; ++i) {
            if (exact_match(candidates[i], reference)) {
                ++fixed;
                break;
            }
        }
    }
    return percentage_2dp(fixed, results.size());
}

EvalReport evaluate(const std::vector<EvalInput>& inputs) {
    if (inputs.empty()) throw std::invalid_argument("evaluate over empty inputs");
    EvalReport report;
    report.n = inputs.size();
    std::size_t fixed = 0;
    double bleu_sum = 0.0;
    double lev_sum = 0.0;
    for (const auto& in : inputs) {
        InstanceScore s;
        s.instance_id = in.instance_id;
        s.exact = exact_match(in.candidate, in.reference);
        s.bleu4 = s.exact ? 1.0 : bleu4(in.candidate, in.reference);
        s.lev = s.exact ? 0 : levenshtein(in.candidate, in.reference);
        fixed += s.exact ? 1 : 0;
        bleu_sum += s.bleu4;
        lev_sum += static_cast<double>(s.lev);
        report.per_instance.push_back(std::move(s));
    }
    report.fix_at_k = percentage_2dp(fixed, report.n);
    report.mean_bleu4 = bleu_sum / static_cast<double>(report.n);
    report.mean_lev = lev_sum / static_cast<double>(report.n);
    return report;
}

json EvalReport::to_json() const {
    json per = json::array();
    for (const auto& s : per_instance)
        per.push_back({{"instance_id", s.instance_id},
                       {"exact", s.exact},
                       {"bleu4", s.bleu4},
                       {"lev", s.lev}});
    return json{{"fix_at_1", fix_at_k},
                {"bleu4_x100", round_half_up(mean_bleu4 * 100.0, 2)},
                {"mean_levenshtein", round_half_up(mean_lev, 2)},
                {"n", n},
                {"per_instance", per}};
}

OverlapMatrix overlap_matrix(
    const std::vector<std::pair<std::string, std::set<std::string>>>& per_model_fixed) {
    if (per_model_fixed.size() < 2)
        throw std::invalid_argument("overlap matrix needs at least 2 models");
    const std::size_t m = per_model_fixed.size();
    OverlapMatrix out;
    out.rates.assign(m, std::vector<std::optional<double>>(m));
    out.uniques.assign(m, 0);
    for (const auto& [name, _] : per_model_fixed) out.models.push_back(name);

    for (std::size_t i = 0; i < m; ++i) {
        const auto& ci = per_model_fixed[i].second;
        // unique(i) = |C_i \ union of the others|
        std::size_t unique = 0;
        for (const auto& id : ci) {
            bool elsewhere = false;
            for (std::size_t j = 0; j < m && !elsewhere; ++j)
                if (j != i && per_model_fixed[j].second.count(id)) elsewhere = true;
            if (!elsewhere) ++unique;
        }
        out.uniques[i] = unique;
        for (std::size_t j = 0; j < m; ++j) {
            if (i == j) continue;
            const auto& cj = per_model_fixed[j].second;
            if (cj.empty()) continue;  // stays nullopt
            std::size_t inter = 0;
            for (const auto& id : ci)
                if (cj.count(id)) ++inter;
            out.rates[i][j] = static_cast<double>(inter) / static_cast<double>(cj.size());
        }
    }
    return out;
}

std::string overlap_csv(const OverlapMatrix& m) {
    std::ostringstream out;
    out << "model";
    for (const auto& name : m.models) out << ',' << name;
    out << '\n';
    for (std::size_t i = 0; i < m.models.size(); ++i) {
        out << m.models[i];
        for (std::size_t j = 0; j < m.models.size(); ++j) {
            out << ',';
            if (i == j)
                out << m.uniques[i];
            else if (m.rates[i][j])
                out << format_fixed(*m.rates[i][j], 2);
            else
                out << "null";
        }
        out << '\n';
    }
    return out.str();
}

}  // namespace fixcrew
