#include "introplan/openai_client.hpp"

#include <chrono>
#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "introplan/errors.hpp"

namespace introplan {

namespace {

struct Endpoint {
    std::string host;  // scheme://authority
    std::string path_prefix;
};

Endpoint split_base_url(const std::string& base_url) {
    auto scheme_end = base_url.find("://");
    if (scheme_end == std::string::npos) {
        throw PreconditionError("base_url must include a scheme: '" + base_url + "'");
    }
    auto path_start = base_url.find('/', scheme_end + 3);
    Endpoint ep;
    if (path_start == std::string::npos) {
        ep.host = base_url;
    } else {
        ep.host = base_url.substr(0, path_start);
        ep.path_prefix = base_url.substr(path_start);
    }
    while (!ep.path_prefix.empty() && ep.path_prefix.back() == '/') ep.path_prefix.pop_back();
    return ep;
}

bool retryable_status(int status) {
    return status == 429 || status == 500 || status == 502 || status == 503 || status == 504;
}

// POSTs with the configured retry budget; retries cover transport faults and
// retryable statuses only.
nlohmann::json post_json(const OpenAiConfig& config, const std::string& path,
                         const nlohmann::json& body) {
    const std::string key = resolve_api_key(config);
    auto endpoint = split_base_url(config.base_url);

    httplib::Client client(endpoint.host);
    client.set_connection_timeout(config.timeout_ms / 1000, (config.timeout_ms % 1000) * 1000);
    client.set_read_timeout(config.timeout_ms / 1000, (config.timeout_ms % 1000) * 1000);
    httplib::Headers headers = {{"Authorization", "Bearer " + key}};

    const std::string payload = body.dump();
    const std::string url = endpoint.path_prefix + path;
    int backoff_ms = config.retry_backoff_ms;
    std::string last_failure;
    for (int attempt = 0; attempt <= config.max_retries; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(std::chrono::milliseconds(backoff_ms));
            backoff_ms *= 2;
        }
        auto res = client.Post(url, headers, payload, "application/json");
        if (!res) {
            last_failure = "transport failure: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status == 200) {
            try {
                return nlohmann::json::parse(res->body);
            } catch (const nlohmann::json::exception& e) {
                throw MalformedResponseError(std::string("response body is not JSON: ") + e.what());
            }
        }
        if (!retryable_status(res->status)) {
            throw ApiError("request to " + url + " failed with status " +
                               std::to_string(res->status) + ": " + res->body,
                           res->status, false);
        }
        last_failure = "status " + std::to_string(res->status);
    }
    if (last_failure.rfind("status", 0) == 0) {
        int status = std::atoi(last_failure.c_str() + 7);
        throw ApiError("request to " + url + " exhausted " + std::to_string(config.max_retries) +
                           " retries (last: " + last_failure + ")",
                       status, true);
    }
    throw TransportError("request to " + url + " exhausted retries (last: " + last_failure + ")");
}

std::vector<TokenLogprob> parse_top_logprob_object(const nlohmann::json& obj) {
    std::vector<TokenLogprob> out;
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        out.push_back({it.key(), it.value().get<double>()});
    }
    return out;
}

CompletionResponse parse_completions_body(const nlohmann::json& body) {
    CompletionResponse response;
    if (!body.contains("choices") || !body["choices"].is_array() || body["choices"].empty()) {
        throw MalformedResponseError("completions response has no choices");
    }
    const auto& choice = body["choices"][0];
    if (!choice.contains("text")) {
        throw MalformedResponseError("completions choice has no text");
    }
    response.text = choice["text"].get<std::string>();
    if (choice.contains("logprobs") && choice["logprobs"].is_object() &&
        choice["logprobs"].contains("top_logprobs")) {
        for (const auto& position : choice["logprobs"]["top_logprobs"]) {
            response.top_logprobs.push_back(parse_top_logprob_object(position));
        }
    }
    return response;
}

CompletionResponse parse_chat_body(const nlohmann::json& body) {
    CompletionResponse response;
    if (!body.contains("choices") || !body["choices"].is_array() || body["choices"].empty()) {
        throw MalformedResponseError("chat response has no choices");
    }
    const auto& choice = body["choices"][0];
    if (!choice.contains("message") || !choice["message"].contains("content")) {
        throw MalformedResponseError("chat choice has no message content");
    }
    if (!choice["message"]["content"].is_null()) {
        response.text = choice["message"]["content"].get<std::string>();
    }
    if (choice.contains("logprobs") && choice["logprobs"].is_object() &&
        choice["logprobs"].contains("content")) {
        for (const auto& position : choice["logprobs"]["content"]) {
            std::vector<TokenLogprob> top;
            if (position.contains("top_logprobs")) {
                for (const auto& alt : position["top_logprobs"]) {
                    top.push_back({alt.at("token").get<std::string>(),
                                   alt.at("logprob").get<double>()});
                }
            }
            response.top_logprobs.push_back(std::move(top));
        }
    }
    return response;
}

}  // namespace

std::string resolve_api_key(const OpenAiConfig& config) {
    if (!config.api_key.empty()) return config.api_key;
    if (const char* env = std::getenv(config.api_key_env.c_str()); env && *env) return env;
    throw CredentialError("no API key: set config api_key or the " + config.api_key_env +
                          " environment variable");
}

OpenAiTextBackend::OpenAiTextBackend(OpenAiConfig config) : config_(std::move(config)) {
    if (config_.api != "completions" && config_.api != "chat") {
        throw PreconditionError("api must be 'completions' or 'chat', got '" + config_.api + "'");
    }
}

CompletionResponse OpenAiTextBackend::complete(const CompletionRequest& request) {
    if (request.max_tokens <= 0) throw PreconditionError("complete: max_tokens must be positive");
    if (request.temperature < 0.0) throw PreconditionError("complete: negative temperature");

    nlohmann::json body;
    std::string path;
    if (config_.api == "completions") {
        path = "/completions";
        body = {{"model", config_.model},
                {"prompt", request.prompt},
                {"max_tokens", request.max_tokens},
                {"temperature", request.temperature}};
        if (request.logprob_top_k > 0) body["logprobs"] = request.logprob_top_k;
    } else {
        path = "/chat/completions";
        body = {{"model", config_.model},
                {"messages", nlohmann::json::array({{{"role", "user"}, {"content", request.prompt}}})},
                {"max_tokens", request.max_tokens},
                {"temperature", request.temperature}};
        if (request.logprob_top_k > 0) {
            body["logprobs"] = true;
            body["top_logprobs"] = request.logprob_top_k;
        }
    }
    auto response_body = post_json(config_, path, body);
    return config_.api == "completions" ? parse_completions_body(response_body)
                                        : parse_chat_body(response_body);
}

std::string OpenAiTextBackend::id() const {
    return "openai(" + config_.api + "," + config_.model + ")@" + config_.base_url;
}

OpenAiEmbeddingBackend::OpenAiEmbeddingBackend(OpenAiConfig config) : config_(std::move(config)) {
    if (config_.embedding_dim == 0) {
        throw PreconditionError("embedding_dim must be positive");
    }
}

EmbeddingVector OpenAiEmbeddingBackend::embed(const std::string& text) {
    if (text.empty()) throw PreconditionError("embed: empty text");
    nlohmann::json body{{"model", config_.embedding_model}, {"input", text}};
    auto response = post_json(config_, "/embeddings", body);
    if (!response.contains("data") || !response["data"].is_array() || response["data"].empty() ||
        !response["data"][0].contains("embedding")) {
        throw MalformedResponseError("embeddings response has no data[0].embedding");
    }
    EmbeddingVector v;
    v.values = response["data"][0]["embedding"].get<std::vector<double>>();
    if (v.dim() != config_.embedding_dim) {
        throw MalformedResponseError("embedding dimension " + std::to_string(v.dim()) +
                                     " differs from configured " +
                                     std::to_string(config_.embedding_dim));
    }
    return v;
}

std::string OpenAiEmbeddingBackend::id() const {
    return "openai-embed(" + config_.embedding_model + ")@" + config_.base_url;
}

}  // namespace introplan
