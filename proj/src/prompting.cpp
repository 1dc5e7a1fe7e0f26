#include "fixcrew/prompting.hpp"

#include <cctype>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "fixcrew/util.hpp"

namespace fixcrew {

using nlohmann::json;

std::string_view role_name(Role role) {
    switch (role) {
        case Role::System: return "system";
        case Role::User: return "user";
        case Role::Assistant: return "assistant";
    }
    return "unknown";
}

Role role_from_name(std::string_view name) {
    if (name == "system") return Role::System;
    if (name == "user") return Role::User;
    if (name == "assistant") return Role::Assistant;
    throw std::invalid_argument("unknown role: " + std::string(name));
}

void Conversation::validate() const {
    if (messages.empty()) throw std::runtime_error("conversation is empty");
    if (messages.front().role != Role::System)
        throw std::runtime_error("conversation must start with a system message");
    for (std::size_t i = 1; i < messages.size(); ++i) {
        const Role expected = (i % 2 == 1) ? Role::User : Role::Assistant;
        if (messages[i].role != expected)
            throw std::runtime_error("conversation roles must alternate user/assistant");
    }
    for (const auto& m : messages) {
        if (m.role != Role::Assistant && m.content.empty())
            throw std::runtime_error("system and user messages must be non-empty");
    }
}

std::string_view stage_name(PromptStage stage) {
    switch (stage) {
        case PromptStage::Report: return "report";
        case PromptStage::Pattern: return "pattern";
        case PromptStage::Explain: return "explain";
        case PromptStage::Generate: return "generate";
        case PromptStage::Review: return "review";
        case PromptStage::Regenerate: return "regenerate";
    }
    return "unknown";
}

std::optional<PromptStage> stage_from_name(std::string_view name) {
    if (name == "report") return PromptStage::Report;
    if (name == "pattern") return PromptStage::Pattern;
    if (name == "explain") return PromptStage::Explain;
    if (name == "generate") return PromptStage::Generate;
    if (name == "review") return PromptStage::Review;
    if (name == "regenerate") return PromptStage::Regenerate;
    return std::nullopt;
}

namespace {

struct BuiltinTemplate {
    PromptStage stage;
    const char* system_text;
    const char* user_skeleton;
};

// kept in sync with templates/<stage>.txt (tested)
const BuiltinTemplate kBuiltins[] = {
    {PromptStage::Report,
     "You are an experienced software tester. You examine a buggy method whose faulty line has "
     "already been located, and you file a concise bug report describing the root cause of the "
     "bug and its impact on the method.",
     R"(<<<BUGGY_METHOD>>>
{buggy_method}
<<<END>>>
<<<BUGGY_LINE>>>
{buggy_line}
<<<END>>>
{context_block}Report the root cause of the bug in the buggy line above and how it affects the method. Keep the report concise and factual.)"},
    {PromptStage::Pattern,
     "You are an experienced software developer. You study examples of buggy code and their "
     "fixes to extract recurring bug-fixing patterns.",
     R"(Below are demonstrations of buggy methods together with their buggy and fixed lines.
{demonstrations}
Summarize the bug-fixing patterns shown by the demonstrations: describe the root causes of the buggy lines and how the fixed lines resolve similar issues.)"},
    {PromptStage::Explain,
     "You are an experienced software developer practicing rubber duck debugging: you explain "
     "code line by line in plain natural language.",
     R"(<<<BUGGY_METHOD>>>
{buggy_method}
<<<END>>>
Explain this method line by line in natural language, describing what the implementation does.)"},
    {PromptStage::Generate,
     "You are an experienced software developer. Your job is to fix the buggy line in the given "
     "buggy method by producing a single-line patch.",
     R"(<<<BUGGY_METHOD>>>
{buggy_method}
<<<END>>>
<<<BUGGY_LINE>>>
{buggy_line}
<<<END>>>
<<<BUG_REPORT>>>
{report}
<<<END>>>
<<<FIX_PATTERNS>>>
{patterns}
<<<END>>>
<<<CODE_EXPLANATION>>>
{explanation}
<<<END>>>
Replace the buggy line with a corrected line. Reply with exactly one fixed line inside a fenced code block.)"},
    {PromptStage::Review,
     "You are an experienced software reviewer. Given a buggy method, the fixing process so "
     "far, and a candidate patch for the buggy line, you judge whether the candidate patch "
     "fixes the bug.",
     R"(<<<BUGGY_METHOD>>>
{buggy_method}
<<<END>>>
<<<BUGGY_LINE>>>
{buggy_line}
<<<END>>>
<<<BUG_REPORT>>>
{report}
<<<END>>>
<<<FIX_PATTERNS>>>
{patterns}
<<<END>>>
<<<CODE_EXPLANATION>>>
{explanation}
<<<END>>>
<<<CANDIDATE_PATCH>>>
{candidate}
<<<END>>>
Judge whether the candidate patch correctly fixes the buggy line. On the first line of your reply output exactly `VERDICT: CORRECT` or `VERDICT: INCORRECT`, then explain your reasoning and, if the patch is incorrect, what must change.)"},
    {PromptStage::Regenerate,
     "You are an experienced software developer revising a rejected patch.",
     R"(<<<REVIEW_FEEDBACK>>>
{feedback}
<<<END>>>
The candidate patch was rejected by the reviewer. Taking the feedback into account, produce a revised single-line patch. Reply with exactly one fixed line inside a fenced code block.)"},
};

}  // namespace

PromptTemplateSet PromptTemplateSet::builtin() {
    PromptTemplateSet set;
    for (const auto& t : kBuiltins)
        set.templates_[t.stage] = {t.stage, t.system_text, t.user_skeleton};
    return set;
}

PromptTemplateSet PromptTemplateSet::load_dir(const std::filesystem::path& dir) {
    PromptTemplateSet set;
    for (const auto& b : kBuiltins) {
        const auto path = dir / (std::string(stage_name(b.stage)) + ".txt");
        std::string text = read_text_file(path);
        const auto sep = text.find("\n---\n");
        if (sep == std::string::npos)
            throw std::runtime_error("template missing --- separator: " + path.string());
        std::string system_text = text.substr(0, sep);
        std::string skeleton = text.substr(sep + 5);
        if (!skeleton.empty() && skeleton.back() == '\n') skeleton.pop_back();
        set.templates_[b.stage] = {b.stage, std::move(system_text), std::move(skeleton)};
    }
    return set;
}

const PromptTemplate& PromptTemplateSet::get(PromptStage stage) const {
    auto it = templates_.find(stage);
    if (it == templates_.end())
        throw std::runtime_error("no template for stage " + std::string(stage_name(stage)));
    return it->second;
}

std::uint64_t PromptTemplateSet::content_hash() const {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (const auto& [stage, t] : templates_) {
        h = fnv1a64(stage_name(stage), h);
        h = fnv1a64(t.system_text, h);
        h = fnv1a64(t.user_skeleton, h);
    }
    return h;
}

std::string make_section(std::string_view name, std::string_view body) {
    std::string out;
    out.reserve(name.size() + body.size() + 16);
    out += "<<<";
    out += name;
    out += ">>>\n";
    out += body;
    out += "\n<<<END>>>";
    return out;
}

std::optional<std::string> find_section(std::string_view text, std::string_view name) {
    const std::string open = "<<<" + std::string(name) + ">>>\n";
    const auto start = text.find(open);
    if (start == std::string_view::npos) return std::nullopt;
    const auto body_start = start + open.size();
    const auto end = text.find("\n<<<END>>>", body_start);
    if (end == std::string_view::npos) return std::nullopt;
    return std::string(text.substr(body_start, end - body_start));
}

PromptRenderer::PromptRenderer(PromptTemplateSet templates) : templates_(std::move(templates)) {}

namespace {

std::string substitute(const std::string& skeleton,
                       const std::map<std::string, std::string>& bindings) {
    std::string out;
    out.reserve(skeleton.size());
    std::size_t i = 0;
    while (i < skeleton.size()) {
        const char c = skeleton[i];
        if (c != '{') {
            out += c;
            ++i;
            continue;
        }
        std::size_t j = i + 1;
        while (j < skeleton.size() && (std::islower(static_cast<unsigned char>(skeleton[j])) ||
                                       skeleton[j] == '_'))
            ++j;
        if (j < skeleton.size() && skeleton[j] == '}' && j > i + 1) {
            const std::string name = skeleton.substr(i + 1, j - i - 1);
            auto it = bindings.find(name);
            if (it == bindings.end())
                throw std::runtime_error("unbound template placeholder: {" + name + "}");
            out += it->second;
            i = j + 1;
            continue;
        }
        out += c;
        ++i;
    }
    return out;
}

}  // namespace

Conversation PromptRenderer::render(PromptStage stage,
                                    const std::map<std::string, std::string>& bindings) const {
    const auto& tpl = templates_.get(stage);
    Conversation conv;
    conv.messages.push_back({Role::System, tpl.system_text});
    conv.messages.push_back({Role::User, substitute(tpl.user_skeleton, bindings)});
    conv.validate();
    return conv;
}

Conversation PromptRenderer::tester_prompt(const BugInstance& x) const {
    std::string context_block;
    if (x.context) context_block = make_section("CONTEXT", *x.context) + "\n";
    return render(PromptStage::Report, {{"buggy_method", x.buggy_method},
                                        {"buggy_line", x.buggy_line},
                                        {"context_block", context_block}});
}

Conversation PromptRenderer::pattern_prompt(const std::vector<Demonstration>& demos) const {
    if (demos.empty()) throw std::invalid_argument("pattern prompt needs at least 1 demonstration");
    std::string blocks;
    for (std::size_t i = 0; i < demos.size(); ++i) {
        const std::string num = std::to_string(i + 1);
        if (i > 0) blocks += "\n";
        blocks += make_section("DEMO_" + num + "_BUGGY_METHOD", demos[i].buggy_method);
        blocks += "\n";
        blocks += make_section("DEMO_" + num + "_BUGGY_LINE", demos[i].buggy_line);
        blocks += "\n";
        blocks += make_section("DEMO_" + num + "_FIXED_LINE", demos[i].fixed_line);
    }
    return render(PromptStage::Pattern, {{"demonstrations", blocks}});
}

Conversation PromptRenderer::explanation_prompt(const BugInstance& x) const {
    return render(PromptStage::Explain, {{"buggy_method", x.buggy_method}});
}

Conversation PromptRenderer::patch_prompt(const BugInstance& x, const std::string& report,
                                          const std::string& patterns,
                                          const std::string& explanation) const {
    if (report.empty() || patterns.empty() || explanation.empty())
        throw std::invalid_argument("patch prompt sections must be non-empty");
    return render(PromptStage::Generate, {{"buggy_method", x.buggy_method},
                                          {"buggy_line", x.buggy_line},
                                          {"report", report},
                                          {"patterns", patterns},
                                          {"explanation", explanation}});
}

Conversation PromptRenderer::review_prompt(const BugInstance& x, const ProcessDigest& digest,
                                           const std::string& candidate) const {
    if (candidate.empty()) throw std::invalid_argument("review prompt needs a candidate patch");
    return render(PromptStage::Review, {{"buggy_method", x.buggy_method},
                                        {"buggy_line", x.buggy_line},
                                        {"report", digest.report},
                                        {"patterns", digest.patterns},
                                        {"explanation", digest.explanation},
                                        {"candidate", candidate}});
}

Conversation PromptRenderer::regenerate_prompt(const Conversation& prior,
                                               const std::string& feedback) const {
    if (is_blank(feedback)) throw std::invalid_argument("regenerate needs non-empty feedback");
    const auto& tpl = templates_.get(PromptStage::Regenerate);
    Conversation conv = prior;
    conv.messages.push_back({Role::User, substitute(tpl.user_skeleton, {{"feedback", feedback}})});
    conv.validate();
    return conv;
}

std::string extract_patch(std::string_view text) {
    if (is_blank(text)) throw std::runtime_error("empty patch");
    const auto lines = split_lines(text);

    auto is_fence = [](const std::string& line) { return trim(line).rfind("```", 0) == 0; };

    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (!is_fence(lines[i])) continue;
        for (std::size_t j = i + 1; j < lines.size(); ++j) {
            if (is_fence(lines[j])) break;
            const std::string t = trim(lines[j]);
            if (!t.empty()) return t;
        }
        break;  // first fenced block yielded nothing usable
    }
    for (const auto& line : lines) {
        const std::string t = trim(line);
        if (!t.empty()) return t;
    }
    throw std::runtime_error("empty patch");
}

ReviewVerdict parse_verdict(std::string_view text) {
    std::string first_line;
    for (const auto& line : split_lines(text)) {
        if (!is_blank(line)) {
            first_line = to_lower(trim(line));
            break;
        }
    }
    std::string feedback(text);
    if (is_blank(feedback)) feedback = "(no review feedback)";
    if (first_line.find("verdict: incorrect") != std::string::npos) return {false, feedback};
    if (first_line.find("verdict: correct") != std::string::npos) return {true, feedback};
    return {false, feedback};  // fail-safe: unparseable reviews never accept
}

std::string conversation_to_jsonl(const Conversation& conv) {
    std::ostringstream out;
    for (const auto& m : conv.messages)
        out << json{{"role", role_name(m.role)}, {"content", m.content}}.dump() << '\n';
    return out.str();
}

Conversation conversation_from_jsonl(std::string_view text) {
    Conversation conv;
    for (const auto& line : split_lines(text)) {
        if (is_blank(line)) continue;
        json j = json::parse(line);
        conv.messages.push_back(
            {role_from_name(j.at("role").get<std::string>()), j.at("content").get<std::string>()});
    }
    return conv;
}

}  // namespace fixcrew
