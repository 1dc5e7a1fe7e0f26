#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace fixcrew {

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);
bool is_blank(std::string_view s);

// split on '\n'; a trailing newline does not produce an extra empty line
std::vector<std::string> split_lines(std::string_view text);

// FNV-1a, used for content hashes of corpora/templates. Not cryptographic.
std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ull);
std::string hex64(std::uint64_t v);
std::uint64_t hash_file(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view content);

// half-up rounding at `decimals` places (0.005 -> 0.01 for non-negative input)
double round_half_up(double value, int decimals);
std::string format_fixed(double value, int decimals);

std::string iso8601_now();

}  // namespace fixcrew
