#pragma once

#include <string>

#include "introplan/backends.hpp"

namespace introplan {

// Connection settings for an OpenAI-compatible service. The credential is
// taken from `api_key` when set, otherwise from the environment variable
// named by `api_key_env`.
struct OpenAiConfig {
    std::string base_url = "https://api.openai.com/v1";
    std::string model = "gpt-4-1106-preview";
    std::string api = "completions";  // "completions" (legacy, per-token logprobs) or "chat"
    std::string embedding_model = "text-embedding-3-small";
    std::size_t embedding_dim = 1536;
    std::string api_key;
    std::string api_key_env = "INTROPLAN_API_KEY";
    int max_retries = 3;
    int retry_backoff_ms = 250;  // doubled per attempt
    int timeout_ms = 60000;
};

// Completions client with bounded retries on retryable statuses (429 and
// 5xx) and transport faults. Throws CredentialError before any network call
// when no key resolves, ApiError on non-success statuses, TransportError
// when the host is unreachable, and MalformedResponseError on contract
// violations in the body.
class OpenAiTextBackend : public TextBackend {
public:
    explicit OpenAiTextBackend(OpenAiConfig config);

    CompletionResponse complete(const CompletionRequest& request) override;
    std::string id() const override;

private:
    OpenAiConfig config_;
};

class OpenAiEmbeddingBackend : public EmbeddingBackend {
public:
    explicit OpenAiEmbeddingBackend(OpenAiConfig config);

    EmbeddingVector embed(const std::string& text) override;
    std::size_t dim() const override { return config_.embedding_dim; }
    std::string id() const override;

private:
    OpenAiConfig config_;
};

// Resolves the credential; throws CredentialError when neither the config
// value nor the environment variable is set.
std::string resolve_api_key(const OpenAiConfig& config);

}  // namespace introplan
