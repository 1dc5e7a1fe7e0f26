#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "fixcrew/prompting.hpp"

namespace fixcrew {

struct GenerationParams {
    double temperature = 0.0;
    int max_tokens = 256;
    int n = 1;  // top-1 only throughout this artifact

    void validate() const;
};

struct CallContext {
    std::string instance_id;
    PromptStage stage = PromptStage::Generate;
    int turn = 0;
};

class BackendError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// stable digest of a request conversation, used for replay matching and
// audit records
std::uint64_t conversation_digest(const Conversation& conv);

// Thread-safe JSONL audit writer. Never receives credential material.
class AuditLog {
public:
    explicit AuditLog(std::filesystem::path path);
    void record(const nlohmann::json& entry);

private:
    std::filesystem::path path_;
    std::mutex mutex_;
};

class ChatBackend {
public:
    virtual ~ChatBackend() = default;

    // conversation must end with a user message
    virtual std::string complete(const Conversation& conversation, const GenerationParams& params,
                                 const CallContext& ctx) = 0;
    virtual std::string name() const = 0;
};

struct BackendConfig {
    enum class Kind { Http, Mock };

    Kind kind = Kind::Mock;
    std::string endpoint;      // http kind: full URL of the chat-completions route
    std::string model_name;
    std::string api_key_env;   // credential read from this env var, never stored
    int timeout_ms = 60000;
    int max_retries = 3;
    int retry_base_delay_ms = 500;
    int min_interval_ms = 0;   // rate limit between requests
    std::string script_path;   // mock kind: stage table or replay script

    static BackendConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;  // redacts nothing because it stores no secrets
};

// Chat-completions HTTP client with bounded exponential-backoff retries.
// 4xx responses are not retried.
class HttpBackend : public ChatBackend {
public:
    HttpBackend(BackendConfig config, std::shared_ptr<AuditLog> audit = nullptr);

    std::string complete(const Conversation& conversation, const GenerationParams& params,
                         const CallContext& ctx) override;
    std::string name() const override { return "http"; }

private:
    std::string post_once(const std::string& body, std::string& error) const;
    void rate_limit_wait();

    BackendConfig config_;
    std::string base_url_;
    std::string path_;
    std::shared_ptr<AuditLog> audit_;
    std::mutex rate_mutex_;
    std::chrono::steady_clock::time_point next_allowed_{};
};

// Deterministic scripted backend: responses keyed by "stage:turn" with a
// plain "stage" fallback.
class MockBackend : public ChatBackend {
public:
    static MockBackend from_script_file(const std::filesystem::path& path);
    static MockBackend from_json(const nlohmann::json& script);
    explicit MockBackend(std::map<std::string, std::string> stage_table);

    std::string complete(const Conversation& conversation, const GenerationParams& params,
                         const CallContext& ctx) override;
    std::string name() const override { return "mock"; }

private:
    std::map<std::string, std::string> stage_table_;
};

// Replays recorded transcripts keyed by (instance, stage, turn); a request
// is matched only when its conversation digest equals the recorded one.
// Unmatched requests go to the fallback backend when present.
class ReplayBackend : public ChatBackend {
public:
    explicit ReplayBackend(std::shared_ptr<ChatBackend> fallback = nullptr);

    void load_transcripts_dir(const std::filesystem::path& dir);
    std::size_t size() const { return responses_.size(); }

    std::string complete(const Conversation& conversation, const GenerationParams& params,
                         const CallContext& ctx) override;
    std::string name() const override { return "replay"; }

private:
    struct Recorded {
        std::uint64_t digest;
        std::string response;
    };

    std::unordered_map<std::string, Recorded> responses_;
    std::shared_ptr<ChatBackend> fallback_;
    mutable std::mutex mutex_;
};

// factory honoring BackendConfig.kind; mock scripts may request replay mode
std::shared_ptr<ChatBackend> make_backend(const BackendConfig& config,
                                          std::shared_ptr<AuditLog> audit = nullptr);

}  // namespace fixcrew
