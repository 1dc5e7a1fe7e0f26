#include "fixcrew/orchestrator.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <fstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "fixcrew/util.hpp"

namespace fixcrew {

using nlohmann::json;

PipelineConfig PipelineConfig::from_json(const json& j) {
    PipelineConfig c;
    c.enable_tester = j.value("enable_tester", c.enable_tester);
    c.enable_diagnosis = j.value("enable_diagnosis", c.enable_diagnosis);
    c.enable_reviewer = j.value("enable_reviewer", c.enable_reviewer);
    c.max_turns = j.value("max_turns", c.max_turns);
    c.k_demos = j.value("k_demos", c.k_demos);
    if (j.contains("caps")) {
        const auto& caps = j.at("caps");
        c.caps.report = caps.value("report", c.caps.report);
        c.caps.pattern = caps.value("pattern", c.caps.pattern);
        c.caps.explanation = caps.value("explanation", c.caps.explanation);
        c.caps.patch = caps.value("patch", c.caps.patch);
        c.caps.review = caps.value("review", c.caps.review);
    }
    c.temperature = j.value("temperature", c.temperature);
    c.shared_developer_context = j.value("shared_developer_context", c.shared_developer_context);
    c.enforce_repo_guard = j.value("enforce_repo_guard", c.enforce_repo_guard);
    if (c.max_turns < 0) throw std::invalid_argument("max_turns must be >= 0");
    if (c.caps.report < 1 || c.caps.pattern < 1 || c.caps.explanation < 1 || c.caps.patch < 1 ||
        c.caps.review < 1)
        throw std::invalid_argument("stage caps must be positive");
    return c;
}

json PipelineConfig::to_json() const {
    return json{{"enable_tester", enable_tester},
                {"enable_diagnosis", enable_diagnosis},
                {"enable_reviewer", enable_reviewer},
                {"max_turns", max_turns},
                {"k_demos", k_demos},
                {"caps",
                 {{"report", caps.report},
                  {"pattern", caps.pattern},
                  {"explanation", caps.explanation},
                  {"patch", caps.patch},
                  {"review", caps.review}}},
                {"temperature", temperature},
                {"shared_developer_context", shared_developer_context},
                {"enforce_repo_guard", enforce_repo_guard}};
}

std::vector<std::string> PipelineResult::stage_sequence() const {
    std::vector<std::string> out;
    out.reserve(records.size());
    for (const auto& r : records) out.emplace_back(stage_name(r.stage));
    return out;
}

json PipelineResult::summary_json() const {
    json j{{"stage", "result"},
           {"instance_id", instance_id},
           {"final_patch", final_patch},
           {"passed_review", passed_review},
           {"turns_used", turns_used},
           {"status", status == Status::Completed ? "completed" : "failed"}};
    if (status == Status::Failed) {
        j["failed_stage"] = failed_stage;
        j["failure_reason"] = failure_reason;
    }
    return j;
}

namespace {

constexpr const char* kNotAvailable = "(not available)";

struct StageFailure : std::runtime_error {
    StageFailure(std::string stage, const std::string& reason)
        : std::runtime_error(reason), stage(std::move(stage)) {}
    std::string stage;
};

}  // namespace

PipelineResult run_pipeline(const BugInstance& x, const PipelineConfig& cfg, ChatBackend& backend,
                            const Bm25Index* index, const PromptRenderer& renderer) {
    PipelineResult res;
    res.instance_id = x.id;
    const int turn_budget = cfg.effective_turns();

    std::string current_stage = "report";
    auto call = [&](PromptStage stage, int turn, Conversation conv, int cap) -> std::string {
        current_stage = stage_name(stage);
        conv.validate();
        StageRecord rec;
        rec.stage = stage;
        rec.turn = turn;
        rec.conversation = conv;
        rec.started = std::chrono::system_clock::now();
        res.records.push_back(std::move(rec));
        auto& stored = res.records.back();
        GenerationParams params{cfg.temperature, cap, 1};
        std::string reply = backend.complete(conv, params, {x.id, stage, turn});
        stored.conversation.messages.push_back({Role::Assistant, reply});
        stored.has_response = true;
        stored.finished = std::chrono::system_clock::now();
        return reply;
    };

    try {
        std::string report = kNotAvailable;
        std::string patterns = kNotAvailable;
        std::string explanation = kNotAvailable;

        // developer conversation carried into the regenerate loop; with
        // shared_developer_context it also spans pattern and explanation
        Conversation dev_conv;
        auto developer_call = [&](PromptStage stage, const Conversation& rendered,
                                  int cap) -> std::string {
            Conversation conv = rendered;
            if (cfg.shared_developer_context && !dev_conv.messages.empty()) {
                conv = dev_conv;
                conv.messages.push_back(rendered.messages.back());
            }
            std::string reply = call(stage, 0, conv, cap);
            if (cfg.shared_developer_context || stage == PromptStage::Generate) {
                dev_conv = std::move(conv);
                dev_conv.messages.push_back({Role::Assistant, reply});
            }
            return reply;
        };

        if (cfg.enable_tester) {
            report = call(PromptStage::Report, 0, renderer.tester_prompt(x), cfg.caps.report);
        }
        if (cfg.enable_diagnosis) {
            current_stage = "retrieve";
            if (!index) throw StageFailure("retrieve", "diagnosis enabled but no index provided");
            if (cfg.enforce_repo_guard && index->contains_repo(x.repo))
                throw StageFailure("retrieve",
                                   "repository leakage: " + x.repo + " is present in the index");
            auto demos = index->top_k(x, static_cast<std::size_t>(cfg.k_demos));
            patterns = developer_call(PromptStage::Pattern, renderer.pattern_prompt(demos),
                                      cfg.caps.pattern);
            explanation = developer_call(PromptStage::Explain, renderer.explanation_prompt(x),
                                         cfg.caps.explanation);
        }

        std::string candidate = extract_patch(developer_call(
            PromptStage::Generate, renderer.patch_prompt(x, report, patterns, explanation),
            cfg.caps.patch));
        res.final_patch = candidate;

        if (turn_budget > 0) {
            const ProcessDigest digest{report, patterns, explanation};
            for (int t = 1; t <= turn_budget; ++t) {
                const std::string review_reply = call(
                    PromptStage::Review, t, renderer.review_prompt(x, digest, candidate),
                    cfg.caps.review);
                const ReviewVerdict verdict = parse_verdict(review_reply);
                res.turns_used = t;
                if (verdict.passed) {
                    res.passed_review = true;
                    break;
                }
                // rejection obliges the developer to regenerate, on the last
                // turn included; that final patch goes out unreviewed
                Conversation regen_conv = renderer.regenerate_prompt(dev_conv, verdict.feedback);
                const std::string regen_reply =
                    call(PromptStage::Regenerate, t, regen_conv, cfg.caps.patch);
                dev_conv = std::move(regen_conv);
                dev_conv.messages.push_back({Role::Assistant, regen_reply});
                candidate = extract_patch(regen_reply);
                res.final_patch = candidate;
            }
        }
        res.status = PipelineResult::Status::Completed;
    } catch (const StageFailure& e) {
        res.status = PipelineResult::Status::Failed;
        res.failed_stage = e.stage;
        res.failure_reason = e.what();
    } catch (const std::exception& e) {
        res.status = PipelineResult::Status::Failed;
        res.failed_stage = current_stage;
        res.failure_reason = e.what();
    }
    return res;
}

std::string transcript_filename(const std::string& instance_id) {
    std::string safe;
    bool altered = false;
    for (char c : instance_id) {
        const bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' ||
                        c == '.';
        safe += ok ? c : '_';
        altered |= !ok;
    }
    if (safe.empty() || altered) {
        // keep distinct ids distinct after sanitization
        safe += "-" + hex64(fnv1a64(instance_id)).substr(8);
    }
    return safe + ".jsonl";
}

namespace {

json message_array(const Conversation& conv, bool drop_last_assistant) {
    json arr = json::array();
    const std::size_t count =
        drop_last_assistant && !conv.messages.empty() &&
                conv.messages.back().role == Role::Assistant
            ? conv.messages.size() - 1
            : conv.messages.size();
    for (std::size_t i = 0; i < count; ++i)
        arr.push_back({{"role", role_name(conv.messages[i].role)},
                       {"content", conv.messages[i].content}});
    return arr;
}

}  // namespace

void write_transcript(const std::filesystem::path& path, const PipelineResult& result) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write transcript: " + path.string());
    for (const auto& rec : result.records) {
        json line{{"instance_id", result.instance_id},
                  {"stage", stage_name(rec.stage)},
                  {"turn", rec.turn},
                  {"prompt", message_array(rec.conversation, rec.has_response)}};
        if (rec.has_response)
            line["response"] = rec.conversation.messages.back().content;
        else
            line["response"] = nullptr;
        out << line.dump() << '\n';
    }
    out << result.summary_json().dump() << '\n';
}

std::optional<PipelineResult> read_completed_transcript(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    std::string line, last;
    while (std::getline(in, line))
        if (!is_blank(line)) last = line;
    if (last.empty()) return std::nullopt;
    json j = json::parse(last, nullptr, false);
    if (j.is_discarded() || !j.is_object() || j.value("stage", "") != "result")
        return std::nullopt;
    PipelineResult res;
    res.instance_id = j.value("instance_id", "");
    res.final_patch = j.value("final_patch", "");
    res.passed_review = j.value("passed_review", false);
    res.turns_used = j.value("turns_used", 0);
    res.status = j.value("status", "") == "completed" ? PipelineResult::Status::Completed
                                                      : PipelineResult::Status::Failed;
    res.failed_stage = j.value("failed_stage", "");
    res.failure_reason = j.value("failure_reason", "");
    return res;
}

std::vector<PipelineResult> run_benchmark(const std::vector<BugInstance>& instances,
                                          const PipelineConfig& cfg, ChatBackend& backend,
                                          const Bm25Index* index, const PromptRenderer& renderer,
                                          const BenchmarkOptions& options) {
    if (options.workers < 1) throw std::invalid_argument("workers must be >= 1");
    const auto transcripts_dir = options.run_dir / "transcripts";
    std::filesystem::create_directories(transcripts_dir);

    std::vector<PipelineResult> results(instances.size());
    std::vector<char> done(instances.size(), 0);

    if (options.resume) {
        for (std::size_t i = 0; i < instances.size(); ++i) {
            const auto path = transcripts_dir / transcript_filename(instances[i].id);
            if (auto prior = read_completed_transcript(path);
                prior && prior->instance_id == instances[i].id) {
                results[i] = std::move(*prior);
                done[i] = 1;
            }
        }
    }

    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= instances.size()) return;
            if (done[i]) continue;
            PipelineResult res = run_pipeline(instances[i], cfg, backend, index, renderer);
            write_transcript(transcripts_dir / transcript_filename(instances[i].id), res);
            results[i] = std::move(res);
        }
    };

    const int pool = std::min<int>(options.workers, static_cast<int>(instances.size()));
    if (pool <= 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        threads.reserve(static_cast<std::size_t>(pool));
        for (int t = 0; t < pool; ++t) threads.emplace_back(worker);
        for (auto& th : threads) th.join();
    }

    write_results_jsonl(options.run_dir / "results.jsonl", results);
    return results;
}

void write_results_jsonl(const std::filesystem::path& path,
                         const std::vector<PipelineResult>& results) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write results: " + path.string());
    for (const auto& r : results) {
        json j = r.summary_json();
        j.erase("stage");
        out << j.dump() << '\n';
    }
}

}  // namespace fixcrew
