#pragma once

#include <chrono>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "fixcrew/backend.hpp"
#include "fixcrew/corpus.hpp"
#include "fixcrew/prompting.hpp"
#include "fixcrew/retrieval.hpp"

namespace fixcrew {

struct StageCaps {
    int report = 200;
    int pattern = 500;
    int explanation = 500;
    int patch = 150;
    int review = 200;
};

struct PipelineConfig {
    bool enable_tester = true;
    bool enable_diagnosis = true;
    bool enable_reviewer = true;
    int max_turns = 3;
    int k_demos = 3;
    StageCaps caps;
    double temperature = 0.0;
    // pattern/explanation/patch in one growing developer conversation
    // instead of fresh contexts with explicit content passing
    bool shared_developer_context = false;
    // refuse to run an instance whose repo is present in the index
    bool enforce_repo_guard = true;

    int effective_turns() const { return enable_reviewer ? max_turns : 0; }

    static PipelineConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

struct StageRecord {
    PromptStage stage;
    int turn = 0;
    // request messages plus, on success, the assistant reply as last message
    Conversation conversation;
    bool has_response = false;
    std::chrono::system_clock::time_point started;
    std::chrono::system_clock::time_point finished;
};

struct PipelineResult {
    enum class Status { Completed, Failed };

    std::string instance_id;
    std::string final_patch;
    bool passed_review = false;
    int turns_used = 0;
    std::vector<StageRecord> records;
    Status status = Status::Failed;
    std::string failed_stage;
    std::string failure_reason;

    std::vector<std::string> stage_sequence() const;
    nlohmann::json summary_json() const;
};

// Executes the four-stage pipeline for one instance: report, diagnose
// (pattern + explanation), generate, then a bounded review/regenerate loop.
// Backend failures fail the instance and keep the partial transcript.
PipelineResult run_pipeline(const BugInstance& x, const PipelineConfig& cfg, ChatBackend& backend,
                            const Bm25Index* index, const PromptRenderer& renderer);

struct BenchmarkOptions {
    std::filesystem::path run_dir;
    int workers = 1;
    bool resume = false;
};

// Runs instances on a bounded worker pool; result order matches input
// order. Transcripts are persisted per instance; with resume, instances
// whose transcript carries a result line are not re-executed.
std::vector<PipelineResult> run_benchmark(const std::vector<BugInstance>& instances,
                                          const PipelineConfig& cfg, ChatBackend& backend,
                                          const Bm25Index* index, const PromptRenderer& renderer,
                                          const BenchmarkOptions& options);

// transcripts/<instance>.jsonl helpers
std::string transcript_filename(const std::string& instance_id);
void write_transcript(const std::filesystem::path& path, const PipelineResult& result);
// parses the result summary back; nullopt when the transcript is absent or
// lacks a terminal result line (i.e. the run crashed mid-instance)
std::optional<PipelineResult> read_completed_transcript(const std::filesystem::path& path);

void write_results_jsonl(const std::filesystem::path& path,
                         const std::vector<PipelineResult>& results);

}  // namespace fixcrew
