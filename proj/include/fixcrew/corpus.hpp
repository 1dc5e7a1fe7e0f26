#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace fixcrew {

// One single-line bug: a method, the offending line within it, and the
// ground-truth one-line fix.
struct BugInstance {
    std::string id;
    std::string repo;
    std::string buggy_method;
    std::size_t buggy_line_index = 0;
    std::string buggy_line;
    std::string fixed_line;
    std::optional<std::string> context;
};

struct Rejection {
    std::size_t line_number = 0;  // 1-based line in the JSONL file
    std::string id;               // empty when the record had none
    std::string reason;
};

struct ParsedDataset {
    std::vector<BugInstance> instances;
    std::vector<Rejection> rejections;
};

// nullopt when the instance satisfies all invariants, otherwise the reason
std::optional<std::string> validate_instance(const BugInstance& x);

// Reads a JSONL dataset. Malformed records are collected as rejections,
// never a global abort; an unreadable file throws.
ParsedDataset parse_dataset(const std::filesystem::path& path);

nlohmann::json instance_to_json(const BugInstance& x);
BugInstance instance_from_json(const nlohmann::json& j);  // throws on missing/invalid fields

void write_dataset(const std::filesystem::path& path, const std::vector<BugInstance>& instances);

struct FilterResult {
    std::vector<BugInstance> kept;
    std::vector<BugInstance> dropped;
};

// keeps instances whose buggy_method lexes to at most max_tokens tokens
FilterResult filter_instances(const std::vector<BugInstance>& instances,
                              std::size_t max_tokens = 150);

struct SplitRatios {
    double train = 0.8;
    double valid = 0.1;
    double test = 0.1;
};

struct SplitDataset {
    std::vector<BugInstance> train;
    std::vector<BugInstance> valid;
    std::vector<BugInstance> test;
    std::uint64_t seed = 0;
};

// Repo-grouped split: instances from one repository land in exactly one
// split. Repo groups are shuffled by a seeded Fisher-Yates over mt19937_64
// (index = next() mod (i+1)), then assigned greedily to the split with the
// largest remaining target deficit. Identical seed => identical split.
SplitDataset split_dataset(const std::vector<BugInstance>& instances, SplitRatios ratios,
                           std::uint64_t seed);

std::uint64_t corpus_content_hash(const std::vector<BugInstance>& instances);

}  // namespace fixcrew
