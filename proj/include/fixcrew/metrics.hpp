#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace fixcrew {

// token-sequence equality: whitespace-insensitive, case-sensitive,
// literal-exact
bool exact_match(std::string_view candidate, std::string_view reference);

// Sentence-level token BLEU with uniform 1..4-gram weights. p1 == 0 forces
// 0; n >= 2 with zero matched n-grams uses add-one smoothing on numerator
// and denominator; BP = 1 if c > r else exp(1 - r/c). Empty candidate -> 0.
double bleu4(std::string_view candidate, std::string_view reference);

std::size_t levenshtein_tokens(std::span<const std::string> a, std::span<const std::string> b);
std::size_t levenshtein(std::string_view candidate, std::string_view reference);

// percentage of instances whose first k candidates contain an exact match,
// rounded half-up to 2 decimals (exact integer rounding)
double fix_at_k(const std::vector<std::pair<std::string, std::vector<std::string>>>& results,
                std::size_t k);

struct InstanceScore {
    std::string instance_id;
    bool exact = false;
    double bleu4 = 0.0;
    std::size_t lev = 0;
};

struct EvalReport {
    double fix_at_k = 0.0;      // percentage, rounded half-up to 2 decimals
    double mean_bleu4 = 0.0;    // [0,1], full precision; reported x100
    double mean_lev = 0.0;      // full precision
    std::size_t n = 0;
    std::vector<InstanceScore> per_instance;

    nlohmann::json to_json() const;  // report-boundary rounding applied here
};

struct EvalInput {
    std::string instance_id;
    std::string candidate;
    std::string reference;
};

EvalReport evaluate(const std::vector<EvalInput>& inputs);

struct OverlapMatrix {
    std::vector<std::string> models;
    // cells[i][j]: i == j -> diagonal holds unique counts (see uniques);
    // i != j -> |C_i intersect C_j| / |C_j|, nullopt when C_j is empty
    std::vector<std::vector<std::optional<double>>> rates;
    std::vector<std::size_t> uniques;
};

OverlapMatrix overlap_matrix(
    const std::vector<std::pair<std::string, std::set<std::string>>>& per_model_fixed);

// headers + row names; diagonal as integers, off-diagonal rates with 2
// decimals, undefined rates as "null"
std::string overlap_csv(const OverlapMatrix& m);

}  // namespace fixcrew
