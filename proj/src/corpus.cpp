#include "fixcrew/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <stdexcept>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "fixcrew/lexer.hpp"
#include "fixcrew/util.hpp"

namespace fixcrew {

using nlohmann::json;

std::optional<std::string> validate_instance(const BugInstance& x) {
    if (x.id.empty()) return "empty id";
    if (x.repo.empty()) return "empty repo";
    auto lines = split_lines(x.buggy_method);
    if (x.buggy_line_index >= lines.size()) return "line mismatch";
    if (trim(lines[x.buggy_line_index]) != trim(x.buggy_line)) return "line mismatch";
    if (token_count(x.fixed_line) == 0) return "empty fixed line";
    return std::nullopt;
}

BugInstance instance_from_json(const json& j) {
    if (!j.is_object()) throw std::runtime_error("record is not an object");
    auto require_string = [&](const char* key) -> std::string {
        auto it = j.find(key);
        if (it == j.end() || !it->is_string())
            throw std::runtime_error(std::string("missing field: ") + key);
        return it->get<std::string>();
    };
    BugInstance x;
    x.id = require_string("id");
    x.repo = require_string("repo");
    x.buggy_method = require_string("buggy_method");
    auto it = j.find("buggy_line_index");
    if (it == j.end() || !it->is_number_integer() || it->get<long long>() < 0)
        throw std::runtime_error("missing field: buggy_line_index");
    x.buggy_line_index = it->get<std::size_t>();
    x.buggy_line = require_string("buggy_line");
    x.fixed_line = require_string("fixed_line");
    if (auto c = j.find("context"); c != j.end() && c->is_string())
        x.context = c->get<std::string>();
    return x;
}

json instance_to_json(const BugInstance& x) {
    json j{{"id", x.id},
           {"repo", x.repo},
           {"buggy_method", x.buggy_method},
           {"buggy_line_index", x.buggy_line_index},
           {"buggy_line", x.buggy_line},
           {"fixed_line", x.fixed_line}};
    if (x.context) j["context"] = *x.context;
    return j;
}

ParsedDataset parse_dataset(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open dataset: " + path.string());
    ParsedDataset out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (is_blank(line)) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            out.rejections.push_back({line_no, "", "invalid JSON"});
            continue;
        }
        BugInstance x;
        try {
            x = instance_from_json(j);
        } catch (const std::exception& e) {
            std::string id;
            if (j.is_object() && j.contains("id") && j["id"].is_string())
                id = j["id"].get<std::string>();
            out.rejections.push_back({line_no, id, e.what()});
            continue;
        }
        if (auto reason = validate_instance(x)) {
            out.rejections.push_back({line_no, x.id, *reason});
            continue;
        }
        out.instances.push_back(std::move(x));
    }
    if (in.bad()) throw std::runtime_error("I/O error reading dataset: " + path.string());
    return out;
}

void write_dataset(const std::filesystem::path& path, const std::vector<BugInstance>& instances) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write dataset: " + path.string());
    for (const auto& x : instances) out << instance_to_json(x).dump() << '\n';
}

FilterResult filter_instances(const std::vector<BugInstance>& instances, std::size_t max_tokens) {
    if (max_tokens < 1) throw std::invalid_argument("max_tokens must be >= 1");
    FilterResult res;
    for (const auto& x : instances) {
        if (token_count(x.buggy_method) <= max_tokens)
            res.kept.push_back(x);
        else
            res.dropped.push_back(x);
    }
    return res;
}

namespace {

// Fisher-Yates with an explicit index draw so the permutation is stable
// across standard library implementations.
template <typename T>
void seeded_shuffle(std::vector<T>& v, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (std::size_t i = v.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(rng() % i);
        std::swap(v[i - 1], v[j]);
    }
}

}  // namespace

SplitDataset split_dataset(const std::vector<BugInstance>& instances, SplitRatios ratios,
                           std::uint64_t seed) {
    const double sum = ratios.train + ratios.valid + ratios.test;
    if (ratios.train <= 0 || ratios.valid <= 0 || ratios.test <= 0 ||
        std::fabs(sum - 1.0) > 1e-9)
        throw std::invalid_argument("split ratios must be positive and sum to 1");

    std::map<std::string, std::size_t> group_sizes;
    for (const auto& x : instances) ++group_sizes[x.repo];
    if (group_sizes.size() < 3) throw std::runtime_error("insufficient repository diversity");

    std::vector<std::string> repos;
    repos.reserve(group_sizes.size());
    for (const auto& [repo, _] : group_sizes) repos.push_back(repo);
    seeded_shuffle(repos, seed);

    const double total = static_cast<double>(instances.size());
    const double targets[3] = {ratios.train * total, ratios.valid * total, ratios.test * total};
    double counts[3] = {0, 0, 0};
    std::unordered_map<std::string, int> assignment;
    for (const auto& repo : repos) {
        int best = 0;
        double best_deficit = targets[0] - counts[0];
        for (int s = 1; s < 3; ++s) {
            double deficit = targets[s] - counts[s];
            if (deficit > best_deficit) {
                best = s;
                best_deficit = deficit;
            }
        }
        assignment[repo] = best;
        counts[best] += static_cast<double>(group_sizes[repo]);
    }

    SplitDataset out;
    out.seed = seed;
    for (const auto& x : instances) {
        switch (assignment[x.repo]) {
            case 0: out.train.push_back(x); break;
            case 1: out.valid.push_back(x); break;
            default: out.test.push_back(x); break;
        }
    }
    return out;
}

std::uint64_t corpus_content_hash(const std::vector<BugInstance>& instances) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (const auto& x : instances) {
        h = fnv1a64(x.id, h);
        h = fnv1a64("\x1f", h);
        h = fnv1a64(x.buggy_method, h);
        h = fnv1a64("\x1f", h);
        h = fnv1a64(x.buggy_line, h);
        h = fnv1a64("\x1f", h);
        h = fnv1a64(x.fixed_line, h);
        h = fnv1a64("\x1e", h);
    }
    return h;
}

}  // namespace fixcrew
