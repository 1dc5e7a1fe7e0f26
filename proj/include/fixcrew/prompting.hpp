#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fixcrew/corpus.hpp"
#include "fixcrew/retrieval.hpp"

namespace fixcrew {

enum class Role { System, User, Assistant };

std::string_view role_name(Role role);
Role role_from_name(std::string_view name);

struct ChatMessage {
    Role role;
    std::string content;

    bool operator==(const ChatMessage&) const = default;
};

// Ordered role-tagged messages forming one agent call: system first, then
// alternating user/assistant, ending with user when submitted.
struct Conversation {
    std::vector<ChatMessage> messages;

    void validate() const;  // throws on role-order violations

    bool operator==(const Conversation&) const = default;
};

enum class PromptStage { Report, Pattern, Explain, Generate, Review, Regenerate };

std::string_view stage_name(PromptStage stage);
std::optional<PromptStage> stage_from_name(std::string_view name);

struct PromptTemplate {
    PromptStage stage;
    std::string system_text;
    std::string user_skeleton;  // {placeholder} syntax
};

// The six stage templates. Built-in defaults mirror the files shipped under
// templates/; load_dir swaps phrasings without a rebuild.
class PromptTemplateSet {
public:
    static PromptTemplateSet builtin();
    // expects <stage>.txt per stage; system text and user skeleton separated
    // by a line containing only "---"
    static PromptTemplateSet load_dir(const std::filesystem::path& dir);

    const PromptTemplate& get(PromptStage stage) const;
    std::uint64_t content_hash() const;

private:
    std::map<PromptStage, PromptTemplate> templates_;
};

struct ReviewVerdict {
    bool passed = false;
    std::string feedback;
};

// report / patterns / explanation digest shown to the reviewer
struct ProcessDigest {
    std::string report;
    std::string patterns;
    std::string explanation;
};

// delimited section helpers: <<<NAME>>> ... <<<END>>>
std::string make_section(std::string_view name, std::string_view body);
std::optional<std::string> find_section(std::string_view text, std::string_view name);

class PromptRenderer {
public:
    explicit PromptRenderer(PromptTemplateSet templates = PromptTemplateSet::builtin());

    Conversation tester_prompt(const BugInstance& x) const;
    Conversation pattern_prompt(const std::vector<Demonstration>& demos) const;
    Conversation explanation_prompt(const BugInstance& x) const;
    Conversation patch_prompt(const BugInstance& x, const std::string& report,
                              const std::string& patterns, const std::string& explanation) const;
    Conversation review_prompt(const BugInstance& x, const ProcessDigest& digest,
                               const std::string& candidate) const;
    // extends the developer's prior conversation with the review feedback
    Conversation regenerate_prompt(const Conversation& prior, const std::string& feedback) const;

    const PromptTemplateSet& templates() const { return templates_; }

private:
    Conversation render(PromptStage stage,
                        const std::map<std::string, std::string>& bindings) const;

    PromptTemplateSet templates_;
};

// First line of the first fenced code block, else the first non-empty line,
// trimmed. Throws on all-whitespace input.
std::string extract_patch(std::string_view text);

// Case-insensitive scan of the first non-empty line for VERDICT: CORRECT /
// VERDICT: INCORRECT; anything else fails safe to not-passed. Total.
ReviewVerdict parse_verdict(std::string_view text);

// one message object per line, {"role": ..., "content": ...}
std::string conversation_to_jsonl(const Conversation& conv);
Conversation conversation_from_jsonl(std::string_view text);

}  // namespace fixcrew
