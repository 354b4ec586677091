#pragma once

#include <chrono>
#include <cstdlib>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "kanon/audit.hpp"
#include "kanon/prompt_engine.hpp"
#include "kanon/rng.hpp"

namespace kanon {

struct BackendConfig {
    enum class Kind { remote_llm, deterministic_synth };
    Kind kind = Kind::deterministic_synth;
    std::optional<std::string> endpoint_url;
    std::optional<std::string> model_name;
    std::optional<std::string> api_key_env;
    double temperature = 0.0;
    int max_output_tokens = 4096;
    int timeout_seconds = 120;
    int max_retries = 3;
    std::uint64_t seed = 0;
    std::size_t target_count = 1;
    /// Delay before the first retry; doubles on every further retry.
    int backoff_initial_ms = 500;

    void validate() const {
        if (timeout_seconds <= 0) throw Error("backend config: timeout_seconds must be > 0");
        if (max_retries < 0) throw Error("backend config: max_retries must be >= 0");
        if (target_count < 1) throw Error("backend config: target_count must be >= 1");
        const bool all = endpoint_url && model_name && api_key_env;
        const bool any = endpoint_url || model_name || api_key_env;
        if (kind == Kind::remote_llm && !all)
            throw Error("backend config: remote_llm needs endpoint_url, model_name and api_key_env");
        if (kind == Kind::deterministic_synth && any)
            throw Error("backend config: endpoint fields are only valid for remote_llm");
    }

    std::string summary() const {
        if (kind == Kind::deterministic_synth) return "deterministic_synth(seed=" + std::to_string(seed) + ")";
        return "remote_llm(model=" + model_name.value_or("?") + ", endpoint=" + endpoint_url.value_or("?") + ")";
    }
};

inline BackendConfig parse_backend_config(const nlohmann::json& j) {
    BackendConfig c;
    const auto kind = j.value("kind", std::string("deterministic_synth"));
    if (kind == "remote_llm" || kind == "llm") c.kind = BackendConfig::Kind::remote_llm;
    else if (kind == "deterministic_synth" || kind == "synth") c.kind = BackendConfig::Kind::deterministic_synth;
    else throw Error("backend config: unknown kind '" + kind + "'");
    if (j.contains("endpoint_url")) c.endpoint_url = j["endpoint_url"].get<std::string>();
    if (j.contains("model_name")) c.model_name = j["model_name"].get<std::string>();
    if (j.contains("api_key_env")) c.api_key_env = j["api_key_env"].get<std::string>();
    c.temperature = j.value("temperature", c.temperature);
    c.max_output_tokens = j.value("max_output_tokens", c.max_output_tokens);
    c.timeout_seconds = j.value("timeout_seconds", c.timeout_seconds);
    c.max_retries = j.value("max_retries", c.max_retries);
    c.seed = j.value("seed", c.seed);
    c.target_count = j.value("target_count", c.target_count);
    c.backoff_initial_ms = j.value("backoff_initial_ms", c.backoff_initial_ms);
    c.validate();
    return c;
}

struct GenerationBatch {
    std::vector<Record> records;
    std::string backend;
    std::optional<std::string> raw_response;
    std::vector<std::pair<std::string, std::string>> rejected_rows; // row text, reason
    int retries = 0;
    std::vector<std::string> log;
};

// ---------------------------------------------------------------------------
// Remote chat-completion client

struct ChatResult {
    std::string content;
    std::string request_body;
    std::string raw_response;
    int retries = 0;
    std::vector<std::string> log;
};

namespace detail {

struct Endpoint {
    std::string base; // scheme://host[:port]
    std::string path;
};

inline Endpoint split_url(const std::string& url) {
    const auto scheme = url.find("://");
    if (scheme == std::string::npos) throw Error("endpoint_url '" + url + "' has no scheme");
    const auto slash = url.find('/', scheme + 3);
    Endpoint e;
    e.base = url.substr(0, slash);
    e.path = slash == std::string::npos ? "/v1/chat/completions" : url.substr(slash);
    return e;
}

inline bool retryable_status(int status) { return status == 429 || status >= 500; }

} // namespace detail

/// Sends one user message and returns the first choice's content. Transport
/// errors, 429 and 5xx are retried with exponential backoff.
inline ChatResult chat_complete(const std::string& message, const BackendConfig& cfg) {
    if (cfg.kind != BackendConfig::Kind::remote_llm) throw BackendError("chat_complete needs a remote_llm config");
    cfg.validate();
    const char* key = std::getenv(cfg.api_key_env->c_str());
    if (!key || !*key) throw BackendError("API key environment variable " + *cfg.api_key_env + " is not set");

    const auto endpoint = detail::split_url(*cfg.endpoint_url);
    nlohmann::json body{{"model", *cfg.model_name},
                        {"messages", nlohmann::json::array({{{"role", "user"}, {"content", message}}})},
                        {"temperature", cfg.temperature},
                        {"max_tokens", cfg.max_output_tokens},
                        {"seed", cfg.seed}};
    ChatResult out;
    out.request_body = body.dump();

    httplib::Client client(endpoint.base);
    client.set_connection_timeout(cfg.timeout_seconds, 0);
    client.set_read_timeout(cfg.timeout_seconds, 0);
    client.set_write_timeout(cfg.timeout_seconds, 0);
    const httplib::Headers headers{{"Authorization", std::string("Bearer ") + key}};

    std::string last_failure;
    bool last_was_timeout = false;
    for (int attempt = 0; attempt <= cfg.max_retries; ++attempt) {
        if (attempt > 0) {
            const auto delay = std::chrono::milliseconds(static_cast<long long>(cfg.backoff_initial_ms) << (attempt - 1));
            out.log.push_back("retry " + std::to_string(attempt) + " after " + std::to_string(delay.count()) +
                              " ms (" + last_failure + ")");
            std::this_thread::sleep_for(delay);
            out.retries = attempt;
        }
        auto res = client.Post(endpoint.path, headers, out.request_body, "application/json");
        if (!res) {
            const auto err = res.error();
            last_was_timeout = err == httplib::Error::Read || err == httplib::Error::ConnectionTimeout ||
                               err == httplib::Error::Write;
            last_failure = "transport error: " + httplib::to_string(err);
            continue;
        }
        last_was_timeout = false;
        if (res->status == 401 || res->status == 403)
            throw BackendError("authentication failed (HTTP " + std::to_string(res->status) + ")");
        if (detail::retryable_status(res->status)) {
            last_failure = "HTTP " + std::to_string(res->status);
            continue;
        }
        if (res->status != 200)
            throw BackendError("HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200));
        out.raw_response = res->body;
        try {
            const auto j = nlohmann::json::parse(res->body);
            out.content = j.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw BackendError(std::string("malformed chat-completion response: ") + e.what());
        }
        return out;
    }
    const int attempts = cfg.max_retries + 1;
    if (last_was_timeout)
        throw BackendError("timeout after " + std::to_string(attempts) + " attempt(s): " + last_failure);
    throw BackendError("request failed after " + std::to_string(attempts) + " attempt(s): " + last_failure);
}

/// Sends an augmentation prompt and parses the fenced CSV answer.
inline GenerationBatch llm_generate(const RenderedPrompt& prompt, const BackendConfig& cfg, const Schema& schema) {
    auto chat = chat_complete(prompt.text, cfg);
    GenerationBatch batch;
    batch.backend = cfg.summary();
    batch.raw_response = chat.raw_response;
    batch.retries = chat.retries;
    batch.log = std::move(chat.log);
    auto parsed = parse_records_response(chat.content, schema);
    batch.records = std::move(parsed.records);
    batch.rejected_rows = std::move(parsed.rejected);
    return batch;
}

// ---------------------------------------------------------------------------
// Deterministic synthesizer

/// Draws j records whose quasi-identifier signature is copied from an
/// existing equivalence class (picked proportionally to its size). The
/// sensitive and insensitive values are resampled from that class.
inline GenerationBatch synth_generate(const Dataset& d_anon, std::size_t j, std::uint64_t seed) {
    if (d_anon.n() == 0) throw Error("synth_generate: empty dataset");
    const auto classes = equivalence_classes(d_anon);
    std::vector<double> weights;
    for (const auto& c : classes) weights.push_back(static_cast<double>(c.member_indices.size()));
    const auto qis = d_anon.schema->qi_indices();
    std::vector<bool> is_qi(d_anon.m(), false);
    for (std::size_t c : qis) is_qi[c] = true;

    Rng rng(seed);
    GenerationBatch batch;
    batch.backend = "deterministic_synth(seed=" + std::to_string(seed) + ")";
    batch.records.reserve(j);
    for (std::size_t n = 0; n < j; ++n) {
        const auto& cls = classes[rng.weighted(weights)];
        const auto& members = cls.member_indices;
        Record rec;
        rec.values.resize(d_anon.m());
        const auto& anchor = d_anon.records[members.front()];
        for (std::size_t c = 0; c < d_anon.m(); ++c) {
            if (is_qi[c]) rec.values[c] = anchor.values[c];
            else rec.values[c] = d_anon.records[members[rng.index(members.size())]].values[c];
        }
        batch.records.push_back(std::move(rec));
    }
    return batch;
}

// ---------------------------------------------------------------------------
// Backend objects used by the pipeline

struct GenerationRequest {
    const Dataset* anonymized = nullptr;
    const RenderedPrompt* context_prompt = nullptr;
    const RenderedPrompt* augmentation_prompt = nullptr;
    std::size_t count = 1;
    std::uint64_t seed = 0;
    int attempt = 0;
};

struct GenerationResult {
    GenerationBatch batch;
    std::optional<std::string> context_response;
    std::vector<std::string> request_log; // request bodies, in order
};

template <class B>
concept GenerationBackend = requires(B& b, const GenerationRequest& r) {
    { b.generate(r) } -> std::same_as<GenerationResult>;
};

struct SynthBackend {
    GenerationResult generate(const GenerationRequest& r) {
        return {synth_generate(*r.anonymized, r.count, r.seed + static_cast<std::uint64_t>(r.attempt)), std::nullopt, {}};
    }
};

/// Sends the context prompt, then the augmentation prompt, as two
/// independent single-message requests.
struct RemoteLlmBackend {
    BackendConfig config;

    GenerationResult generate(const GenerationRequest& r) {
        GenerationResult out;
        const Schema& schema = *r.anonymized->schema;
        if (r.context_prompt) {
            try {
                auto ctx = chat_complete(r.context_prompt->text, config);
                out.request_log.push_back(ctx.request_body);
                out.context_response = ctx.content;
            } catch (const BackendError& e) {
                out.batch.log.push_back(std::string("context prompt failed: ") + e.what());
            }
        }
        auto chat = chat_complete(r.augmentation_prompt->text, config);
        out.request_log.push_back(chat.request_body);
        out.batch.backend = config.summary();
        out.batch.raw_response = chat.raw_response;
        out.batch.retries = chat.retries;
        out.batch.log.insert(out.batch.log.end(), chat.log.begin(), chat.log.end());
        auto parsed = parse_records_response(chat.content, schema);
        out.batch.records = std::move(parsed.records);
        out.batch.rejected_rows = std::move(parsed.rejected);
        return out;
    }
};

static_assert(GenerationBackend<SynthBackend>);
static_assert(GenerationBackend<RemoteLlmBackend>);

} // namespace kanon
