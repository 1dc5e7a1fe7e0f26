#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fixcrew/lexer.hpp"
#include "fixcrew/metrics.hpp"
#include "support/oracles.hpp"

using namespace fixcrew;
using fixcrew::testing::kBleuFixtures;
using fixcrew::testing::lev_oracle;
using fixcrew::testing::random_tokens;

TEST_CASE("exact_match is whitespace-insensitive and case-sensitive") {
    CHECK(exact_match("return  x ;", "return x;"));
    CHECK_FALSE(exact_match("return X;", "return x;"));
    CHECK_FALSE(exact_match("", "return x;"));
    CHECK(exact_match("", ""));
    CHECK(exact_match("s = \"a b\";", "s = \"a b\" ;"));
    CHECK_FALSE(exact_match("s = \"a b\";", "s = \"a  b\";"));  // literal-exact
}

TEST_CASE("bleu4 matches the frozen hand-computed oracle") {
    for (const auto& f : kBleuFixtures) {
        INFO(f.name);
        CHECK(std::fabs(bleu4(f.candidate, f.reference) - f.expected) < 1e-9);
    }
}

TEST_CASE("bleu4 fixture token counts are what the oracle assumed") {
    CHECK(token_texts("if ( a >= b )") ==
          std::vector<std::string>{"if", "(", "a", ">", "=", "b", ")"});
    CHECK(token_texts("s = \"a b\" ;") == std::vector<std::string>{"s", "=", "\"a b\"", ";"});
    CHECK(token_texts("a b a b a b").size() == 6);
}

TEST_CASE("bleu4 edge cases") {
    CHECK(bleu4("", "return x ;") == 0.0);
    CHECK(bleu4("   ", "return x ;") == 0.0);
    CHECK(bleu4("zzz", "return x ;") == 0.0);  // p1 == 0
    CHECK(bleu4("return x ;", "") == 0.0);      // no reference unigram can match
    std::mt19937_64 rng(2);
    for (int i = 0; i < 100; ++i) {
        auto toks = random_tokens(rng, 10);
        std::string s;
        for (auto& t : toks) s += t + " ";
        auto other = random_tokens(rng, 10);
        std::string o;
        for (auto& t : other) o += t + " ";
        const double v = bleu4(s, o);
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
        if (!toks.empty()) CHECK(bleu4(s, s) == doctest::Approx(1.0));
    }
}

TEST_CASE("levenshtein trivials") {
    CHECK(levenshtein("return x ;", "return x ;") == 0);
    CHECK(levenshtein("return x ;", "return y ;") == 1);
    CHECK(levenshtein("", "a b c") == 3);
    CHECK(levenshtein("a b c", "") == 3);
}

TEST_CASE("levenshtein equals the memoized recursive oracle") {
    std::mt19937_64 rng(31);
    for (int i = 0; i < 300; ++i) {
        auto a = random_tokens(rng, 12);
        auto b = random_tokens(rng, 12);
        CHECK(levenshtein_tokens(a, b) == lev_oracle(a, b));
    }
}

TEST_CASE("levenshtein is a metric") {
    std::mt19937_64 rng(77);
    for (int i = 0; i < 200; ++i) {
        auto a = random_tokens(rng, 8);
        auto b = random_tokens(rng, 8);
        auto c = random_tokens(rng, 8);
        const auto dab = levenshtein_tokens(a, b);
        const auto dba = levenshtein_tokens(b, a);
        CHECK(dab == dba);                          // symmetry
        CHECK(levenshtein_tokens(a, a) == 0);       // identity
        CHECK(dab <= levenshtein_tokens(a, c) + levenshtein_tokens(c, b));  // triangle
        if (a != b) CHECK(dab > 0);
    }
}

TEST_CASE("fix_at_k reproduces the 501-of-2292 headline") {
    std::vector<std::pair<std::string, std::vector<std::string>>> results;
    for (int i = 0; i < 2292; ++i) {
        const bool hit = i < 501;
        results.emplace_back("return x ;",
                             std::vector<std::string>{hit ? "return x ;" : "return y ;"});
    }
    CHECK(fix_at_k(results, 1) == 21.86);
}

TEST_CASE("fix_at_k extremes and monotonicity") {
    std::vector<std::pair<std::string, std::vector<std::string>>> all = {
        {"a ;", {"a ;"}}, {"b ;", {"b ;"}}};
    CHECK(fix_at_k(all, 1) == 100.0);
    std::vector<std::pair<std::string, std::vector<std::string>>> none = {
        {"a ;", {"x ;"}}, {"b ;", {"x ;"}}};
    CHECK(fix_at_k(none, 1) == 0.0);
    CHECK_THROWS(fix_at_k({}, 1));

    // second candidate is right: k=1 misses, k=2 catches
    std::vector<std::pair<std::string, std::vector<std::string>>> staged = {
        {"a ;", {"wrong ;", "a ;"}}, {"b ;", {"b ;", "wrong ;"}}};
    const double k1 = fix_at_k(staged, 1);
    const double k2 = fix_at_k(staged, 2);
    CHECK(k1 == 50.0);
    CHECK(k2 == 100.0);
    CHECK(k1 <= k2);
}

TEST_CASE("evaluate aggregates are recomputable from per-instance scores") {
    std::vector<EvalInput> inputs = {
        {"i1", "return x ;", "return x ;"},
        {"i2", "return y ;", "return x ;"},
        {"i3", "a = b + 1 ;", "a = b - 1 ;"},
        {"i4", "foo ( )", "bar ( baz )"},
    };
    auto report = evaluate(inputs);
    CHECK(report.n == 4);
    REQUIRE(report.per_instance.size() == 4);

    std::size_t exact = 0;
    double bleu_sum = 0, lev_sum = 0;
    for (const auto& s : report.per_instance) {
        if (s.exact) {
            ++exact;
            CHECK(s.bleu4 == 1.0);
            CHECK(s.lev == 0);
        }
        bleu_sum += s.bleu4;
        lev_sum += static_cast<double>(s.lev);
    }
    CHECK(exact == 1);
    CHECK(report.fix_at_k == 25.0);
    CHECK(report.mean_bleu4 == doctest::Approx(bleu_sum / 4.0));
    CHECK(report.mean_lev == doctest::Approx(lev_sum / 4.0));

    auto j = report.to_json();
    CHECK(j["n"] == 4);
    CHECK(j["fix_at_1"] == 25.0);
    CHECK_THROWS(evaluate({}));
}

TEST_CASE("overlap of identical sets") {
    std::set<std::string> s = {"a", "b", "c"};
    auto m = overlap_matrix({{"m1", s}, {"m2", s}});
    CHECK(*m.rates[0][1] == 1.0);
    CHECK(*m.rates[1][0] == 1.0);
    CHECK(m.uniques[0] == 0);
    CHECK(m.uniques[1] == 0);
}

TEST_CASE("overlap of disjoint sets") {
    auto m = overlap_matrix({{"m1", {"a", "b"}}, {"m2", {"c", "d", "e"}}});
    CHECK(*m.rates[0][1] == 0.0);
    CHECK(*m.rates[1][0] == 0.0);
    CHECK(m.uniques[0] == 2);
    CHECK(m.uniques[1] == 3);
}

TEST_CASE("overlap against an empty set is undefined") {
    auto m = overlap_matrix({{"m1", {"a"}}, {"m2", {}}});
    CHECK_FALSE(m.rates[0][1].has_value());  // denominator |C_2| = 0
    CHECK(m.rates[1][0].has_value());
    auto csv = overlap_csv(m);
    CHECK(csv.find("null") != std::string::npos);
}

TEST_CASE("overlap reproduces the 0.32 / 256 reporting fixture") {
    std::set<std::string> a, b;
    for (int i = 0; i < 256; ++i) a.insert("only_a_" + std::to_string(i));
    for (int i = 0; i < 32; ++i) {
        a.insert("shared_" + std::to_string(i));
        b.insert("shared_" + std::to_string(i));
    }
    for (int i = 0; i < 68; ++i) b.insert("only_b_" + std::to_string(i));
    REQUIRE(b.size() == 100);

    auto m = overlap_matrix({{"A", a}, {"B", b}});
    CHECK(*m.rates[0][1] == doctest::Approx(0.32));
    CHECK(m.uniques[0] == 256);
    CHECK(m.uniques[1] == 68);

    auto csv = overlap_csv(m);
    CHECK(csv.find("A,256,0.32") != std::string::npos);
    CHECK(csv.rfind("model,A,B", 0) == 0);
}

TEST_CASE("sum of uniques never exceeds the union") {
    std::mt19937_64 rng(13);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<std::pair<std::string, std::set<std::string>>> sets;
        std::set<std::string> all;
        const int models = 2 + static_cast<int>(rng() % 4);
        for (int mi = 0; mi < models; ++mi) {
            std::set<std::string> s;
            const int size = static_cast<int>(rng() % 20);
            for (int i = 0; i < size; ++i) {
                auto id = "id" + std::to_string(rng() % 30);
                s.insert(id);
                all.insert(id);
            }
            sets.emplace_back("m" + std::to_string(mi), std::move(s));
        }
        auto m = overlap_matrix(sets);
        std::size_t unique_sum = 0;
        for (auto u : m.uniques) unique_sum += u;
        CHECK(unique_sum <= all.size());
        for (std::size_t i = 0; i < sets.size(); ++i)
            CHECK(m.uniques[i] <= sets[i].second.size());
    }
    CHECK_THROWS(overlap_matrix({{"only", {"a"}}}));
}
