#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <string>

#include "fixcrew/prompting.hpp"

using namespace fixcrew;

namespace {

BugInstance sample_instance() {
    BugInstance x;
    x.id = "inst-1";
    x.repo = "acme/widgets";
    x.buggy_method = "int size ( ) {\nreturn count - 1 ;\n}";
    x.buggy_line_index = 1;
    x.buggy_line = "return count - 1 ;";
    x.fixed_line = "return count ;";
    return x;
}

Demonstration demo(int i) {
    Demonstration d;
    d.instance_id = "demo-" + std::to_string(i);
    d.buggy_method = "void m" + std::to_string(i) + " ( ) {\nx = " + std::to_string(i) + " ;\n}";
    d.buggy_line = "x = " + std::to_string(i) + " ;";
    d.fixed_line = "x = " + std::to_string(i + 1) + " ;";
    d.score = 1.0 / (i + 1);
    return d;
}

const PromptRenderer& renderer() {
    static PromptRenderer r;
    return r;
}

}  // namespace

TEST_CASE("tester prompt shape and fidelity") {
    auto x = sample_instance();
    auto conv = renderer().tester_prompt(x);
    REQUIRE(conv.messages.size() == 2);
    CHECK(conv.messages[0].role == Role::System);
    CHECK(conv.messages[1].role == Role::User);
    const auto& user = conv.messages[1].content;
    CHECK(find_section(user, "BUGGY_METHOD") == x.buggy_method);
    CHECK(find_section(user, "BUGGY_LINE") == x.buggy_line);
    CHECK_FALSE(find_section(user, "CONTEXT").has_value());
}

TEST_CASE("tester prompt includes context when present") {
    auto x = sample_instance();
    x.context = "class Holder {\n  int count;\n}";
    auto conv = renderer().tester_prompt(x);
    CHECK(find_section(conv.messages[1].content, "CONTEXT") == *x.context);
}

TEST_CASE("pattern prompt renders numbered blocks in retrieval order") {
    std::vector<Demonstration> demos = {demo(1), demo(2), demo(3)};
    auto conv = renderer().pattern_prompt(demos);
    REQUIRE(conv.messages.size() == 2);
    const auto& user = conv.messages[1].content;
    for (int i = 1; i <= 3; ++i) {
        const std::string n = std::to_string(i);
        CHECK(find_section(user, "DEMO_" + n + "_BUGGY_METHOD") == demos[i - 1].buggy_method);
        CHECK(find_section(user, "DEMO_" + n + "_BUGGY_LINE") == demos[i - 1].buggy_line);
        CHECK(find_section(user, "DEMO_" + n + "_FIXED_LINE") == demos[i - 1].fixed_line);
    }
    CHECK(user.find("DEMO_1_BUGGY_METHOD") < user.find("DEMO_2_BUGGY_METHOD"));
    CHECK(user.find("DEMO_2_BUGGY_METHOD") < user.find("DEMO_3_BUGGY_METHOD"));

    auto one = renderer().pattern_prompt({demo(7)});
    CHECK(find_section(one.messages[1].content, "DEMO_1_FIXED_LINE") == demo(7).fixed_line);
    CHECK_THROWS(renderer().pattern_prompt({}));
}

TEST_CASE("explanation prompt shows the method but not the fault location") {
    auto x = sample_instance();
    auto conv = renderer().explanation_prompt(x);
    REQUIRE(conv.messages.size() == 2);
    const auto& user = conv.messages[1].content;
    CHECK(find_section(user, "BUGGY_METHOD") == x.buggy_method);
    CHECK_FALSE(find_section(user, "BUGGY_LINE").has_value());
}

TEST_CASE("patch prompt carries all five sections in order") {
    auto x = sample_instance();
    auto conv = renderer().patch_prompt(x, "the report", "the patterns", "the explanation");
    const auto& user = conv.messages[1].content;
    CHECK(find_section(user, "BUGGY_METHOD") == x.buggy_method);
    CHECK(find_section(user, "BUGGY_LINE") == x.buggy_line);
    CHECK(find_section(user, "BUG_REPORT") == "the report");
    CHECK(find_section(user, "FIX_PATTERNS") == "the patterns");
    CHECK(find_section(user, "CODE_EXPLANATION") == "the explanation");
    CHECK(user.find("<<<BUGGY_METHOD>>>") < user.find("<<<BUGGY_LINE>>>"));
    CHECK(user.find("<<<BUGGY_LINE>>>") < user.find("<<<BUG_REPORT>>>"));
    CHECK(user.find("<<<BUG_REPORT>>>") < user.find("<<<FIX_PATTERNS>>>"));
    CHECK(user.find("<<<FIX_PATTERNS>>>") < user.find("<<<CODE_EXPLANATION>>>"));
    CHECK_THROWS(renderer().patch_prompt(x, "", "p", "e"));
}

TEST_CASE("review prompt instructs the verdict line") {
    auto x = sample_instance();
    auto conv = renderer().review_prompt(x, {"r", "p", "e"}, "return count ;");
    const auto& user = conv.messages[1].content;
    CHECK(find_section(user, "CANDIDATE_PATCH") == "return count ;");
    CHECK(user.find("VERDICT: CORRECT") != std::string::npos);
    CHECK(user.find("VERDICT: INCORRECT") != std::string::npos);
    CHECK_THROWS(renderer().review_prompt(x, {"r", "p", "e"}, ""));
}

TEST_CASE("regenerate extends the developer conversation") {
    auto x = sample_instance();
    auto prior = renderer().patch_prompt(x, "r", "p", "e");
    prior.messages.push_back({Role::Assistant, "```\nreturn count ;\n```"});
    auto conv = renderer().regenerate_prompt(prior, "off by one remains");
    REQUIRE(conv.messages.size() == prior.messages.size() + 1);
    CHECK(conv.messages.back().role == Role::User);
    CHECK(find_section(conv.messages.back().content, "REVIEW_FEEDBACK") == "off by one remains");
    conv.validate();
    CHECK_THROWS(renderer().regenerate_prompt(prior, "   "));
}

TEST_CASE("conversation role invariants are enforced") {
    Conversation bad;
    CHECK_THROWS(bad.validate());
    bad.messages = {{Role::User, "hi"}};
    CHECK_THROWS(bad.validate());
    bad.messages = {{Role::System, "s"}, {Role::Assistant, "a"}};
    CHECK_THROWS(bad.validate());
    bad.messages = {{Role::System, "s"}, {Role::User, ""}};
    CHECK_THROWS(bad.validate());
    Conversation ok;
    ok.messages = {{Role::System, "s"}, {Role::User, "u"}, {Role::Assistant, "a"},
                   {Role::User, "u2"}};
    ok.validate();
}

TEST_CASE("extract_patch fenced rule") {
    CHECK(extract_patch("```\nreturn x;\n```") == "return x;");
    CHECK(extract_patch("```java\nreturn x;\n```") == "return x;");
    CHECK(extract_patch("Sure, here it is:\n```\n  return x;  \n```\ndone") == "return x;");
}

TEST_CASE("extract_patch fallback rule") {
    CHECK(extract_patch("Here is the fix:\nreturn x;") == "Here is the fix:");
    CHECK(extract_patch("\n\n  lone line  \n") == "lone line");
    CHECK(extract_patch("```\n\n```\ntext after") == "```");  // degenerate fence falls back
}

TEST_CASE("extract_patch rejects whitespace-only input") {
    CHECK_THROWS_WITH(extract_patch("   \n\n"), "empty patch");
    CHECK_THROWS_WITH(extract_patch(""), "empty patch");
}

TEST_CASE("extract_patch of a fenced single line is the identity") {
    for (const std::string line : {"return x ;", "foo(bar, baz);", "int i = 0;"}) {
        CHECK(extract_patch("```\n" + line + "\n```") == line);
    }
}

TEST_CASE("parse_verdict trivials") {
    auto v = parse_verdict("VERDICT: CORRECT\nLooks good.");
    CHECK(v.passed);
    CHECK(v.feedback == "VERDICT: CORRECT\nLooks good.");

    v = parse_verdict("verdict: incorrect\nOff-by-one remains.");
    CHECK_FALSE(v.passed);
    CHECK(v.feedback.find("Off-by-one") != std::string::npos);

    v = parse_verdict("The patch might work.");
    CHECK_FALSE(v.passed);  // fail-safe
    CHECK(v.feedback == "The patch might work.");

    v = parse_verdict("");
    CHECK_FALSE(v.passed);
    CHECK_FALSE(v.feedback.empty());

    // the marker must sit on the first non-empty line
    v = parse_verdict("Preamble\nVERDICT: CORRECT");
    CHECK_FALSE(v.passed);

    v = parse_verdict("\n  Verdict: Correct, ship it");
    CHECK(v.passed);
}

TEST_CASE("builtin templates equal the files shipped under templates/") {
    auto from_files = PromptTemplateSet::load_dir(std::string(FIXCREW_SOURCE_DIR) + "/templates");
    auto builtin = PromptTemplateSet::builtin();
    for (auto stage : {PromptStage::Report, PromptStage::Pattern, PromptStage::Explain,
                       PromptStage::Generate, PromptStage::Review, PromptStage::Regenerate}) {
        INFO(stage_name(stage));
        CHECK(from_files.get(stage).system_text == builtin.get(stage).system_text);
        CHECK(from_files.get(stage).user_skeleton == builtin.get(stage).user_skeleton);
    }
    CHECK(from_files.content_hash() == builtin.content_hash());
}

TEST_CASE("a customized template directory actually swaps phrasings") {
    namespace fs = std::filesystem;
    auto dir = fs::temp_directory_path() / "fixcrew_tpl_test";
    fs::create_directories(dir);
    for (auto stage : {PromptStage::Report, PromptStage::Pattern, PromptStage::Explain,
                       PromptStage::Generate, PromptStage::Review, PromptStage::Regenerate}) {
        std::ofstream out(dir / (std::string(stage_name(stage)) + ".txt"));
        out << "custom system\n---\n";
        if (stage == PromptStage::Report)
            out << "XX {buggy_method} YY {buggy_line} ZZ {context_block}\n";
        else if (stage == PromptStage::Pattern)
            out << "{demonstrations}\n";
        else if (stage == PromptStage::Explain)
            out << "{buggy_method}\n";
        else if (stage == PromptStage::Generate)
            out << "{buggy_method}{buggy_line}{report}{patterns}{explanation}\n";
        else if (stage == PromptStage::Review)
            out << "{buggy_method}{buggy_line}{report}{patterns}{explanation}{candidate}\n";
        else
            out << "{feedback}\n";
    }
    PromptRenderer custom(PromptTemplateSet::load_dir(dir));
    auto conv = custom.tester_prompt(sample_instance());
    CHECK(conv.messages[0].content == "custom system");
    CHECK(conv.messages[1].content.rfind("XX ", 0) == 0);
    fs::remove_all(dir);
}

TEST_CASE("unbound placeholders are a render-time error") {
    namespace fs = std::filesystem;
    auto dir = fs::temp_directory_path() / "fixcrew_tpl_bad";
    fs::create_directories(dir);
    for (auto stage : {PromptStage::Report, PromptStage::Pattern, PromptStage::Explain,
                       PromptStage::Generate, PromptStage::Review, PromptStage::Regenerate}) {
        std::ofstream out(dir / (std::string(stage_name(stage)) + ".txt"));
        out << "sys\n---\n{no_such_placeholder}\n";
    }
    PromptRenderer bad(PromptTemplateSet::load_dir(dir));
    CHECK_THROWS(bad.tester_prompt(sample_instance()));
    fs::remove_all(dir);
}

TEST_CASE("conversation JSONL round-trips") {
    Conversation conv;
    conv.messages = {{Role::System, "persona"},
                     {Role::User, "line1\nline2 with \"quotes\""},
                     {Role::Assistant, "reply"}};
    auto text = conversation_to_jsonl(conv);
    CHECK(std::count(text.begin(), text.end(), '\n') == 3);  // one message per line
    auto back = conversation_from_jsonl(text);
    CHECK(back == conv);
}
