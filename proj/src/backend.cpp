#include "fixcrew/backend.hpp"

#include <cstdlib>
#include <fstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "fixcrew/lexer.hpp"
#include "fixcrew/util.hpp"

namespace fixcrew {

using nlohmann::json;

void GenerationParams::validate() const {
    if (temperature < 0) throw std::invalid_argument("temperature must be >= 0");
    if (max_tokens < 1) throw std::invalid_argument("max_tokens must be >= 1");
    if (n != 1) throw std::invalid_argument("only top-1 completions are supported");
}

std::uint64_t conversation_digest(const Conversation& conv) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (const auto& m : conv.messages) {
        h = fnv1a64(role_name(m.role), h);
        h = fnv1a64("\x1f", h);
        h = fnv1a64(m.content, h);
        h = fnv1a64("\x1e", h);
    }
    return h;
}

AuditLog::AuditLog(std::filesystem::path path) : path_(std::move(path)) {
    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
}

void AuditLog::record(const json& entry) {
    std::lock_guard lock(mutex_);
    std::ofstream out(path_, std::ios::binary | std::ios::app);
    if (out) out << entry.dump() << '\n';
}

BackendConfig BackendConfig::from_json(const json& j) {
    BackendConfig c;
    const std::string kind = j.value("kind", "mock");
    if (kind == "http")
        c.kind = Kind::Http;
    else if (kind == "mock")
        c.kind = Kind::Mock;
    else
        throw std::invalid_argument("unknown backend kind: " + kind);
    c.endpoint = j.value("endpoint", "");
    c.model_name = j.value("model_name", "");
    c.api_key_env = j.value("api_key_env", "");
    c.timeout_ms = j.value("timeout_ms", 60000);
    c.max_retries = j.value("max_retries", 3);
    c.retry_base_delay_ms = j.value("retry_base_delay_ms", 500);
    c.min_interval_ms = j.value("min_interval_ms", 0);
    c.script_path = j.value("script_path", "");
    if (c.kind == Kind::Http && (c.endpoint.empty() || c.model_name.empty()))
        throw std::invalid_argument("http backend requires endpoint and model_name");
    return c;
}

json BackendConfig::to_json() const {
    return json{{"kind", kind == Kind::Http ? "http" : "mock"},
                {"endpoint", endpoint},
                {"model_name", model_name},
                {"api_key_env", api_key_env},
                {"timeout_ms", timeout_ms},
                {"max_retries", max_retries},
                {"retry_base_delay_ms", retry_base_delay_ms},
                {"min_interval_ms", min_interval_ms},
                {"script_path", script_path}};
}

namespace {

// splits "http://host:port/path" into client base and request path
void split_endpoint(const std::string& endpoint, std::string& base, std::string& path) {
    const auto scheme_end = endpoint.find("://");
    if (scheme_end == std::string::npos)
        throw std::invalid_argument("endpoint must be an http(s) URL: " + endpoint);
    const auto path_start = endpoint.find('/', scheme_end + 3);
    if (path_start == std::string::npos) {
        base = endpoint;
        path = "/v1/chat/completions";
    } else {
        base = endpoint.substr(0, path_start);
        path = endpoint.substr(path_start);
    }
}

json conversation_wire(const Conversation& conv) {
    json messages = json::array();
    for (const auto& m : conv.messages)
        messages.push_back({{"role", role_name(m.role)}, {"content", m.content}});
    return messages;
}

std::size_t conversation_tokens(const Conversation& conv) {
    std::size_t total = 0;
    for (const auto& m : conv.messages) total += token_count(m.content);
    return total;
}

}  // namespace

HttpBackend::HttpBackend(BackendConfig config, std::shared_ptr<AuditLog> audit)
    : config_(std::move(config)), audit_(std::move(audit)) {
    split_endpoint(config_.endpoint, base_url_, path_);
    next_allowed_ = std::chrono::steady_clock::now();
}

void HttpBackend::rate_limit_wait() {
    if (config_.min_interval_ms <= 0) return;
    std::chrono::steady_clock::time_point wake;
    {
        std::lock_guard lock(rate_mutex_);
        const auto now = std::chrono::steady_clock::now();
        wake = std::max(now, next_allowed_);
        next_allowed_ = wake + std::chrono::milliseconds(config_.min_interval_ms);
    }
    std::this_thread::sleep_until(wake);
}

std::string HttpBackend::complete(const Conversation& conversation,
                                  const GenerationParams& params, const CallContext& ctx) {
    params.validate();
    if (conversation.messages.empty() || conversation.messages.back().role != Role::User)
        throw BackendError("conversation must end with a user message");

    json body{{"model", config_.model_name},
              {"messages", conversation_wire(conversation)},
              {"temperature", params.temperature},
              {"max_tokens", params.max_tokens},
              {"n", params.n}};
    const std::string payload = body.dump();

    const char* api_key = nullptr;
    if (!config_.api_key_env.empty()) {
        api_key = std::getenv(config_.api_key_env.c_str());
        if (!api_key)
            throw BackendError("credential environment variable not set: " + config_.api_key_env);
    }

    const auto started = std::chrono::steady_clock::now();
    std::string failure;
    int attempts = 0;
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
        if (attempt > 0) {
            const auto delay = config_.retry_base_delay_ms * (1 << (attempt - 1));
            std::this_thread::sleep_for(std::chrono::milliseconds(delay));
        }
        rate_limit_wait();
        ++attempts;

        httplib::Client client(base_url_);
        client.set_connection_timeout(std::chrono::milliseconds(config_.timeout_ms));
        client.set_read_timeout(std::chrono::milliseconds(config_.timeout_ms));
        httplib::Headers headers;
        if (api_key) headers.emplace("Authorization", std::string("Bearer ") + api_key);

        auto res = client.Post(path_, headers, payload, "application/json");
        if (!res) {
            failure = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status >= 200 && res->status < 300) {
            json reply = json::parse(res->body, nullptr, false);
            if (reply.is_discarded() || !reply.contains("choices") || reply["choices"].empty())
                throw BackendError("request rejected: malformed completion response");
            std::string text =
                reply["choices"][0].at("message").at("content").get<std::string>();
            if (audit_) {
                const auto latency = std::chrono::duration_cast<std::chrono::milliseconds>(
                                         std::chrono::steady_clock::now() - started)
                                         .count();
                audit_->record(json{{"ts", iso8601_now()},
                                    {"backend", "http"},
                                    {"instance", ctx.instance_id},
                                    {"stage", stage_name(ctx.stage)},
                                    {"turn", ctx.turn},
                                    {"attempts", attempts},
                                    {"latency_ms", latency},
                                    {"prompt_tokens", conversation_tokens(conversation)},
                                    {"response_tokens", token_count(text)},
                                    {"status", "ok"}});
            }
            return text;
        }
        if (res->status >= 400 && res->status < 500) {
            const std::string msg = "request rejected: HTTP " + std::to_string(res->status);
            if (audit_)
                audit_->record(json{{"ts", iso8601_now()},
                                    {"backend", "http"},
                                    {"instance", ctx.instance_id},
                                    {"stage", stage_name(ctx.stage)},
                                    {"turn", ctx.turn},
                                    {"attempts", attempts},
                                    {"status", "error"},
                                    {"error", msg}});
            throw BackendError(msg);
        }
        failure = "HTTP " + std::to_string(res->status);
    }
    const std::string msg = "backend unavailable after " + std::to_string(attempts) +
                            " attempts (" + failure + ")";
    if (audit_)
        audit_->record(json{{"ts", iso8601_now()},
                            {"backend", "http"},
                            {"instance", ctx.instance_id},
                            {"stage", stage_name(ctx.stage)},
                            {"turn", ctx.turn},
                            {"attempts", attempts},
                            {"status", "error"},
                            {"error", msg}});
    throw BackendError(msg);
}

MockBackend::MockBackend(std::map<std::string, std::string> stage_table)
    : stage_table_(std::move(stage_table)) {}

MockBackend MockBackend::from_json(const json& script) {
    if (!script.is_object() || !script.contains("stage_table"))
        throw std::invalid_argument("mock script must contain a stage_table object");
    std::map<std::string, std::string> table;
    for (const auto& [key, value] : script.at("stage_table").items())
        table[key] = value.get<std::string>();
    return MockBackend(std::move(table));
}

MockBackend MockBackend::from_script_file(const std::filesystem::path& path) {
    return from_json(json::parse(read_text_file(path)));
}

std::string MockBackend::complete(const Conversation& conversation,
                                  const GenerationParams& params, const CallContext& ctx) {
    params.validate();
    if (conversation.messages.empty() || conversation.messages.back().role != Role::User)
        throw BackendError("conversation must end with a user message");
    const std::string stage(stage_name(ctx.stage));
    auto it = stage_table_.find(stage + ":" + std::to_string(ctx.turn));
    if (it == stage_table_.end()) it = stage_table_.find(stage);
    if (it == stage_table_.end())
        throw BackendError("script exhausted: no scripted response for stage " + stage +
                           " turn " + std::to_string(ctx.turn));
    return it->second;
}

ReplayBackend::ReplayBackend(std::shared_ptr<ChatBackend> fallback)
    : fallback_(std::move(fallback)) {}

namespace {

std::string replay_key(const std::string& instance_id, const std::string& stage, int turn) {
    return instance_id + "\x1f" + stage + "\x1f" + std::to_string(turn);
}

}  // namespace

void ReplayBackend::load_transcripts_dir(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) return;
    std::lock_guard lock(mutex_);
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (!entry.is_regular_file() || entry.path().extension() != ".jsonl") continue;
        std::ifstream in(entry.path(), std::ios::binary);
        std::string line;
        while (std::getline(in, line)) {
            if (is_blank(line)) continue;
            json j = json::parse(line, nullptr, false);
            if (j.is_discarded() || !j.is_object()) continue;
            const std::string stage = j.value("stage", "");
            if (stage.empty() || stage == "result") continue;
            if (!j.contains("response") || !j.at("response").is_string()) continue;
            Conversation prompt;
            for (const auto& m : j.at("prompt"))
                prompt.messages.push_back({role_from_name(m.at("role").get<std::string>()),
                                           m.at("content").get<std::string>()});
            const auto key =
                replay_key(j.value("instance_id", ""), stage, j.value("turn", 0));
            responses_[key] = {conversation_digest(prompt),
                               j.at("response").get<std::string>()};
        }
    }
}

std::string ReplayBackend::complete(const Conversation& conversation,
                                    const GenerationParams& params, const CallContext& ctx) {
    const auto key = replay_key(ctx.instance_id, std::string(stage_name(ctx.stage)), ctx.turn);
    {
        std::lock_guard lock(mutex_);
        auto it = responses_.find(key);
        if (it != responses_.end() && it->second.digest == conversation_digest(conversation))
            return it->second.response;
    }
    if (fallback_) return fallback_->complete(conversation, params, ctx);
    throw BackendError("script exhausted: no replayed response for instance " + ctx.instance_id +
                       " stage " + std::string(stage_name(ctx.stage)) + " turn " +
                       std::to_string(ctx.turn));
}

std::shared_ptr<ChatBackend> make_backend(const BackendConfig& config,
                                          std::shared_ptr<AuditLog> audit) {
    if (config.kind == BackendConfig::Kind::Http)
        return std::make_shared<HttpBackend>(config, std::move(audit));
    if (config.script_path.empty())
        throw std::invalid_argument("mock backend requires a script path");
    const json script = json::parse(read_text_file(config.script_path));
    const std::string mode = script.value("mode", "stage_table");
    if (mode == "replay") {
        auto replay = std::make_shared<ReplayBackend>();
        replay->load_transcripts_dir(script.at("replay_path").get<std::string>());
        return replay;
    }
    return std::make_shared<MockBackend>(MockBackend::from_json(script));
}

}  // namespace fixcrew
