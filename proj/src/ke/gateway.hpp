#pragma once

#include "ke/jsonutil.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace ke {

enum class ChatRole { system, user, assistant };

const char* chat_role_name(ChatRole role);

struct ChatMessage {
    ChatRole role = ChatRole::user;
    std::string content;  // never empty

    bool operator==(const ChatMessage&) const = default;
};

struct SamplingParams {
    double temperature = 0.7;
    int max_tokens = 2048;
    int n_samples = 1;
    std::optional<int64_t> seed;
};

struct TokenUsage {
    int64_t prompt_tokens = 0;
    int64_t completion_tokens = 0;
};

struct LlmResponse {
    std::vector<std::string> texts;  // length == n_samples requested
    std::string model_id;
    TokenUsage usage;
};

struct EmbeddingVector {
    std::vector<double> values;

    size_t dim() const { return values.size(); }
    // All-zero vectors mark degenerate input; callers treat similarity as 0.
    bool valid() const;
};

// Clamped to [0,1] when requested by the caller; raw value may be negative for
// remote embeddings. Throws DimMismatch for unequal non-empty dimensions.
double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b);

struct BackendConfig {
    std::string base_url;  // falls back to KE_BASE_URL when empty
    std::string api_key_env = "KE_API_KEY";
    std::string chat_model = "gpt-4o-mini";
    std::string embed_model = "all-MiniLM-L6-v2";
    double timeout_seconds = 60.0;
    int max_retries = 3;
    int max_concurrent_requests = 4;

    bool operator==(const BackendConfig&) const = default;
};

// Stable identity of a chat request: SHA-256 over canonical request JSON
// (sorted keys, no extra whitespace, UTF-8).
std::string chat_request_digest(const std::vector<ChatMessage>& messages,
                                const SamplingParams& params, const std::string& model);

class ChatBackend {
  public:
    virtual ~ChatBackend() = default;
    virtual LlmResponse chat(const std::vector<ChatMessage>& messages,
                             const SamplingParams& params) = 0;
    virtual std::string name() const = 0;
};

class EmbedBackend {
  public:
    virtual ~EmbedBackend() = default;
    virtual EmbeddingVector embed(const std::string& text) = 0;
    virtual size_t dim() const = 0;
    virtual std::string name() const = 0;
};

// Chat-completions HTTP backend (POST {base_url}/v1/chat/completions).
// Retries RateLimited/Timeout/5xx with exponential backoff; AuthError and
// other caller errors are never retried. The sleeper is injectable so tests
// can assert retry behavior without waiting.
class HttpChatBackend : public ChatBackend {
  public:
    using Sleeper = std::function<void(int64_t /*milliseconds*/)>;

    explicit HttpChatBackend(BackendConfig config, Sleeper sleeper = {});
    ~HttpChatBackend() override;

    LlmResponse chat(const std::vector<ChatMessage>& messages,
                     const SamplingParams& params) override;
    std::string name() const override { return "http"; }

  private:
    LlmResponse chat_once(const std::vector<ChatMessage>& messages, const SamplingParams& params,
                          int n_samples);

    BackendConfig config_;
    Sleeper sleeper_;
    std::unique_ptr<class RequestGate> gate_;
};

// Deterministic replay from a JSON-lines fixture: {"digest":...,"texts":[...]}.
class ReplayChatBackend : public ChatBackend {
  public:
    explicit ReplayChatBackend(const std::filesystem::path& fixture_path);

    LlmResponse chat(const std::vector<ChatMessage>& messages,
                     const SamplingParams& params) override;
    std::string name() const override { return "replay"; }

    size_t entry_count() const { return entries_.size(); }

  private:
    std::string model_;
    std::unordered_map<std::string, std::vector<std::string>> entries_;
};

// Wraps another backend and appends each (digest, texts) pair to the fixture.
class RecordingChatBackend : public ChatBackend {
  public:
    RecordingChatBackend(std::shared_ptr<ChatBackend> inner, std::string model,
                         std::filesystem::path fixture_path);

    LlmResponse chat(const std::vector<ChatMessage>& messages,
                     const SamplingParams& params) override;
    std::string name() const override { return "record(" + inner_->name() + ")"; }

  private:
    std::shared_ptr<ChatBackend> inner_;
    std::string model_;
    std::filesystem::path fixture_path_;
    std::mutex write_mutex_;
};

// Hashed character trigram term frequencies, 512 dims, L2-normalized.
// Deterministic and dependency-free; the remote path is the production default.
class LexicalEmbedder : public EmbedBackend {
  public:
    static constexpr size_t kDim = 512;

    EmbeddingVector embed(const std::string& text) override;
    size_t dim() const override { return kDim; }
    std::string name() const override { return "lexical"; }
};

// POST {base_url}/v1/embeddings.
class RemoteEmbedder : public EmbedBackend {
  public:
    explicit RemoteEmbedder(BackendConfig config, size_t expected_dim = 0);

    EmbeddingVector embed(const std::string& text) override;
    size_t dim() const override { return dim_; }
    std::string name() const override { return "remote"; }

  private:
    BackendConfig config_;
    size_t dim_;
};

// Uniform entry point the agents talk to.
class LlmGateway {
  public:
    LlmGateway(std::shared_ptr<ChatBackend> chat_backend, std::shared_ptr<EmbedBackend> embedder,
               std::string model)
        : chat_backend_(std::move(chat_backend)), embedder_(std::move(embedder)),
          model_(std::move(model)) {}

    LlmResponse chat(const std::vector<ChatMessage>& messages, const SamplingParams& params);
    EmbeddingVector embed(const std::string& text) { return embedder_->embed(text); }

    size_t embedding_dim() const { return embedder_->dim(); }
    const std::string& model() const { return model_; }
    ChatBackend& chat_backend() { return *chat_backend_; }

  private:
    std::shared_ptr<ChatBackend> chat_backend_;
    std::shared_ptr<EmbedBackend> embedder_;
    std::string model_;
};

// Resolution order: explicit config value, then KE_BASE_URL, then localhost.
std::string resolve_base_url(const BackendConfig& config);
std::string resolve_api_key(const BackendConfig& config);

}  // namespace ke
