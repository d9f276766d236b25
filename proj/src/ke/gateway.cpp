#include "ke/gateway.hpp"

#include "ke/error.hpp"
#include "ke/util.hpp"

#include <httplib.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstdlib>
#include <fstream>
#include <thread>

namespace ke {

const char* chat_role_name(ChatRole role) {
    switch (role) {
        case ChatRole::system: return "system";
        case ChatRole::user: return "user";
        case ChatRole::assistant: return "assistant";
    }
    return "user";
}

bool EmbeddingVector::valid() const {
    for (double v : values) {
        if (v != 0.0) return true;
    }
    return false;
}

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (!a.valid() || !b.valid()) return 0.0;
    if (a.dim() != b.dim()) {
        throw Error(ErrorCode::dim_mismatch,
                    "embedding dims differ: " + std::to_string(a.dim()) + " vs " +
                        std::to_string(b.dim()));
    }
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (size_t i = 0; i < a.values.size(); ++i) {
        dot += a.values[i] * b.values[i];
        na += a.values[i] * a.values[i];
        nb += b.values[i] * b.values[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

std::string chat_request_digest(const std::vector<ChatMessage>& messages,
                                const SamplingParams& params, const std::string& model) {
    json req;
    json msgs = json::array();
    for (const auto& m : messages) {
        msgs.push_back({{"role", chat_role_name(m.role)}, {"content", m.content}});
    }
    req["messages"] = std::move(msgs);
    req["model"] = model;
    json p;
    p["temperature"] = params.temperature;
    p["max_tokens"] = params.max_tokens;
    p["n_samples"] = params.n_samples;
    if (params.seed) p["seed"] = *params.seed;
    req["params"] = std::move(p);
    return sha256_hex(req.dump());
}

std::string resolve_base_url(const BackendConfig& config) {
    if (!config.base_url.empty()) return config.base_url;
    if (const char* env = std::getenv("KE_BASE_URL"); env && *env) return env;
    return "http://127.0.0.1:8000";
}

std::string resolve_api_key(const BackendConfig& config) {
    if (config.api_key_env.empty()) return {};
    if (const char* env = std::getenv(config.api_key_env.c_str()); env) return env;
    return {};
}

// ---------------------------------------------------------------------------
// HTTP backend

// Caps in-flight requests per backend.
class RequestGate {
  public:
    explicit RequestGate(int limit) : available_(limit > 0 ? limit : 1) {}

    void acquire() {
        std::unique_lock lock(mutex_);
        cv_.wait(lock, [&] { return available_ > 0; });
        --available_;
    }
    void release() {
        {
            std::lock_guard lock(mutex_);
            ++available_;
        }
        cv_.notify_one();
    }

  private:
    std::mutex mutex_;
    std::condition_variable cv_;
    int available_;
};

namespace {

struct GateHold {
    RequestGate& gate;
    explicit GateHold(RequestGate& g) : gate(g) { gate.acquire(); }
    ~GateHold() { gate.release(); }
};

void validate_messages(const std::vector<ChatMessage>& messages) {
    if (messages.empty()) {
        throw Error(ErrorCode::invalid_argument, "chat requires at least one message");
    }
    for (const auto& m : messages) {
        if (m.content.empty()) {
            throw Error(ErrorCode::invalid_argument, "chat message content must be non-empty");
        }
    }
}

void validate_params(const SamplingParams& params) {
    if (params.n_samples < 1) {
        throw Error(ErrorCode::invalid_argument, "n_samples must be >= 1");
    }
    if (params.temperature < 0.0) {
        throw Error(ErrorCode::invalid_argument, "temperature must be >= 0");
    }
}

Error error_for_status(int status, const std::string& body) {
    std::string detail = "HTTP " + std::to_string(status) +
                         (body.empty() ? "" : ": " + body.substr(0, 200));
    if (status == 401 || status == 403) return Error(ErrorCode::auth_error, detail);
    if (status == 429) return Error(ErrorCode::rate_limited, detail);
    if (status == 408) return Error(ErrorCode::timeout, detail);
    if (status >= 500) return Error(ErrorCode::backend_error, detail);
    return Error(ErrorCode::invalid_argument, detail);
}

json post_json(const BackendConfig& config, const std::string& path, const json& body) {
    std::string base = resolve_base_url(config);
    httplib::Client client(base);
    int timeout_s = std::max(1, static_cast<int>(config.timeout_seconds));
    client.set_connection_timeout(timeout_s, 0);
    client.set_read_timeout(timeout_s, 0);
    client.set_write_timeout(timeout_s, 0);

    httplib::Headers headers;
    std::string key = resolve_api_key(config);
    if (!key.empty()) headers.emplace("Authorization", "Bearer " + key);

    auto res = client.Post(path, headers, body.dump(), "application/json");
    if (!res) {
        auto err = res.error();
        if (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read ||
            err == httplib::Error::Write) {
            throw Error(ErrorCode::timeout, "request to " + base + path + " timed out");
        }
        throw Error(ErrorCode::backend_error,
                    "request to " + base + path + " failed: " + to_string(err));
    }
    if (res->status < 200 || res->status >= 300) throw error_for_status(res->status, res->body);
    json parsed = json::parse(res->body, nullptr, false);
    if (parsed.is_discarded()) {
        throw Error(ErrorCode::backend_error, "non-JSON response from " + base + path);
    }
    return parsed;
}

}  // namespace

HttpChatBackend::HttpChatBackend(BackendConfig config, Sleeper sleeper)
    : config_(std::move(config)),
      sleeper_(sleeper ? std::move(sleeper)
                       : [](int64_t ms) { std::this_thread::sleep_for(std::chrono::milliseconds(ms)); }),
      gate_(std::make_unique<RequestGate>(config_.max_concurrent_requests)) {}

HttpChatBackend::~HttpChatBackend() = default;

LlmResponse HttpChatBackend::chat_once(const std::vector<ChatMessage>& messages,
                                       const SamplingParams& params, int n_samples) {
    json body;
    body["model"] = config_.chat_model;
    json msgs = json::array();
    for (const auto& m : messages) {
        msgs.push_back({{"role", chat_role_name(m.role)}, {"content", m.content}});
    }
    body["messages"] = std::move(msgs);
    body["temperature"] = params.temperature;
    body["max_tokens"] = params.max_tokens;
    if (n_samples > 1) body["n"] = n_samples;
    if (params.seed) body["seed"] = *params.seed;

    int attempts = 0;
    for (;;) {
        try {
            GateHold hold(*gate_);
            json res = post_json(config_, "/v1/chat/completions", body);
            LlmResponse out;
            out.model_id = res.value("model", config_.chat_model);
            if (res.contains("choices") && res["choices"].is_array()) {
                for (const auto& choice : res["choices"]) {
                    if (choice.contains("message") && choice["message"].contains("content")) {
                        out.texts.push_back(choice["message"]["content"].get<std::string>());
                    }
                }
            }
            if (out.texts.empty()) {
                throw Error(ErrorCode::backend_error, "response carried no choices");
            }
            if (res.contains("usage")) {
                out.usage.prompt_tokens = res["usage"].value("prompt_tokens", 0);
                out.usage.completion_tokens = res["usage"].value("completion_tokens", 0);
            }
            return out;
        } catch (const Error& e) {
            if (!e.retryable() || attempts >= config_.max_retries) throw;
            int64_t delay_ms = static_cast<int64_t>(250) << std::min(attempts, 6);
            sleeper_(std::min<int64_t>(delay_ms, 8000));
            ++attempts;
        }
    }
}

LlmResponse HttpChatBackend::chat(const std::vector<ChatMessage>& messages,
                                  const SamplingParams& params) {
    validate_messages(messages);
    validate_params(params);

    LlmResponse out = chat_once(messages, params, params.n_samples);
    // Servers without native n>1 support return a single choice; fan out the
    // remaining samples as independent requests.
    while (static_cast<int>(out.texts.size()) < params.n_samples) {
        LlmResponse extra = chat_once(messages, params, 1);
        out.texts.push_back(extra.texts.front());
        out.usage.prompt_tokens += extra.usage.prompt_tokens;
        out.usage.completion_tokens += extra.usage.completion_tokens;
    }
    if (static_cast<int>(out.texts.size()) > params.n_samples) {
        out.texts.resize(static_cast<size_t>(params.n_samples));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Replay / recording

ReplayChatBackend::ReplayChatBackend(const std::filesystem::path& fixture_path) {
    std::ifstream in(fixture_path);
    if (!in) {
        throw Error(ErrorCode::not_found, "replay fixture not found: " + fixture_path.string());
    }
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.contains("digest") || !j.contains("texts")) {
            throw Error(ErrorCode::malformed_line,
                        fixture_path.string() + ":" + std::to_string(line_no) +
                            ": expected {\"digest\",\"texts\"}");
        }
        std::vector<std::string> texts;
        for (const auto& t : j["texts"]) texts.push_back(t.get<std::string>());
        entries_[j["digest"].get<std::string>()] = std::move(texts);
        if (model_.empty()) model_ = j.value("model", "");
    }
    if (model_.empty()) model_ = "replay";
}

LlmResponse ReplayChatBackend::chat(const std::vector<ChatMessage>& messages,
                                    const SamplingParams& params) {
    validate_messages(messages);
    validate_params(params);
    std::string digest = chat_request_digest(messages, params, model_);
    auto it = entries_.find(digest);
    if (it == entries_.end()) {
        throw Error(ErrorCode::fixture_miss, "no fixture entry for digest " + digest);
    }
    LlmResponse out;
    out.model_id = model_;
    out.texts = it->second;
    if (static_cast<int>(out.texts.size()) != params.n_samples) {
        // A single recorded text satisfies any n at temperature 0 (sampling is
        // deterministic there); anything else is a stale fixture.
        if (params.temperature == 0.0 && out.texts.size() == 1) {
            out.texts.assign(static_cast<size_t>(params.n_samples), out.texts.front());
        } else {
            throw Error(ErrorCode::fixture_miss,
                        "fixture entry for " + digest + " has " +
                            std::to_string(out.texts.size()) + " texts, request wants " +
                            std::to_string(params.n_samples));
        }
    }
    return out;
}

RecordingChatBackend::RecordingChatBackend(std::shared_ptr<ChatBackend> inner, std::string model,
                                           std::filesystem::path fixture_path)
    : inner_(std::move(inner)), model_(std::move(model)), fixture_path_(std::move(fixture_path)) {}

LlmResponse RecordingChatBackend::chat(const std::vector<ChatMessage>& messages,
                                       const SamplingParams& params) {
    LlmResponse res = inner_->chat(messages, params);
    json entry;
    entry["digest"] = chat_request_digest(messages, params, model_);
    entry["model"] = model_;
    entry["texts"] = res.texts;

    std::lock_guard lock(write_mutex_);
    std::ofstream out(fixture_path_, std::ios::app | std::ios::binary);
    if (!out) {
        throw Error(ErrorCode::persistence_error,
                    "cannot append to fixture " + fixture_path_.string());
    }
    out << entry.dump() << '\n';
    out.flush();
    return res;
}

// ---------------------------------------------------------------------------
// Embedders

namespace {

uint64_t fnv1a64(std::string_view s) {
    uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace

EmbeddingVector LexicalEmbedder::embed(const std::string& text) {
    EmbeddingVector vec;
    vec.values.assign(kDim, 0.0);
    std::string norm = collapse_whitespace(to_lower(text));
    if (norm.empty()) return vec;  // zero vector, flagged invalid

    if (norm.size() < 3) {
        vec.values[fnv1a64(norm) % kDim] += 1.0;
    } else {
        for (size_t i = 0; i + 3 <= norm.size(); ++i) {
            vec.values[fnv1a64(std::string_view(norm).substr(i, 3)) % kDim] += 1.0;
        }
    }
    double norm2 = 0.0;
    for (double v : vec.values) norm2 += v * v;
    double scale = 1.0 / std::sqrt(norm2);
    for (double& v : vec.values) v *= scale;
    return vec;
}

RemoteEmbedder::RemoteEmbedder(BackendConfig config, size_t expected_dim)
    : config_(std::move(config)), dim_(expected_dim) {}

EmbeddingVector RemoteEmbedder::embed(const std::string& text) {
    EmbeddingVector vec;
    if (trim(text).empty()) {
        vec.values.assign(dim_ > 0 ? dim_ : 1, 0.0);
        return vec;
    }
    json body;
    body["model"] = config_.embed_model;
    body["input"] = text;
    json res = post_json(config_, "/v1/embeddings", body);
    if (!res.contains("data") || !res["data"].is_array() || res["data"].empty() ||
        !res["data"][0].contains("embedding")) {
        throw Error(ErrorCode::backend_error, "embeddings response missing data[0].embedding");
    }
    for (const auto& v : res["data"][0]["embedding"]) vec.values.push_back(v.get<double>());
    if (dim_ == 0) dim_ = vec.values.size();
    if (vec.values.size() != dim_) {
        throw Error(ErrorCode::dim_mismatch,
                    "embedding dim " + std::to_string(vec.values.size()) + ", expected " +
                        std::to_string(dim_));
    }
    double norm2 = 0.0;
    for (double v : vec.values) norm2 += v * v;
    if (norm2 > 0.0) {
        double scale = 1.0 / std::sqrt(norm2);
        for (double& v : vec.values) v *= scale;
    }
    return vec;
}

LlmResponse LlmGateway::chat(const std::vector<ChatMessage>& messages,
                             const SamplingParams& params) {
    validate_messages(messages);
    validate_params(params);
    LlmResponse res = chat_backend_->chat(messages, params);
    if (static_cast<int>(res.texts.size()) != params.n_samples) {
        throw Error(ErrorCode::backend_error,
                    "backend returned " + std::to_string(res.texts.size()) + " texts, expected " +
                        std::to_string(params.n_samples));
    }
    return res;
}

}  // namespace ke
