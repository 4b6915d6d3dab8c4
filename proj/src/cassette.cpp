#include "introplan/cassette.hpp"

#include <cstdio>
#include <fstream>
#include <mutex>

#include <json.hpp>

#include "introplan/errors.hpp"
#include "introplan/rng.hpp"

namespace introplan {

struct Cassette::Data {
    nlohmann::json completions = nlohmann::json::object();
    nlohmann::json embeddings = nlohmann::json::object();
    std::mutex mutex;
};

namespace {

nlohmann::json response_to_json(const CompletionResponse& response) {
    nlohmann::json positions = nlohmann::json::array();
    for (const auto& position : response.top_logprobs) {
        nlohmann::json entries = nlohmann::json::array();
        for (const auto& e : position) {
            entries.push_back({{"token", e.token}, {"logprob", e.logprob}});
        }
        positions.push_back(std::move(entries));
    }
    return nlohmann::json{{"text", response.text}, {"top_logprobs", std::move(positions)}};
}

CompletionResponse response_from_json(const nlohmann::json& j) {
    CompletionResponse response;
    response.text = j.at("text").get<std::string>();
    for (const auto& position : j.value("top_logprobs", nlohmann::json::array())) {
        std::vector<TokenLogprob> entries;
        for (const auto& e : position) {
            entries.push_back({e.at("token").get<std::string>(), e.at("logprob").get<double>()});
        }
        response.top_logprobs.push_back(std::move(entries));
    }
    return response;
}

}  // namespace

Cassette::Cassette(std::string path, Mode mode)
    : path_(std::move(path)), mode_(mode), data_(std::make_unique<Data>()) {
    std::ifstream in(path_);
    if (in) {
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw SchemaError("cassette '" + path_ + "' is corrupt: " + e.what());
        }
        data_->completions = j.value("completions", nlohmann::json::object());
        data_->embeddings = j.value("embeddings", nlohmann::json::object());
    } else if (mode_ == Mode::replay) {
        throw SchemaError("cassette '" + path_ + "' does not exist (replay mode)");
    }
}

Cassette::~Cassette() {
    try {
        flush();
    } catch (...) {
        // Destructor must not throw; an unflushed recording surfaces as a
        // replay miss later.
    }
}

std::string Cassette::completion_key(const CompletionRequest& request) {
    char params[96];
    std::snprintf(params, sizeof params, "\x1f%d\x1f%.17g\x1f%d", request.max_tokens,
                  request.temperature, request.logprob_top_k);
    return rng::to_hex(rng::fnv1a64(request.prompt + params));
}

std::string Cassette::embedding_key(const std::string& text) {
    return rng::to_hex(rng::fnv1a64("embed\x1f" + text));
}

bool Cassette::has_completion(const std::string& key) const {
    std::lock_guard<std::mutex> lock(data_->mutex);
    return data_->completions.contains(key);
}

CompletionResponse Cassette::completion(const std::string& key) const {
    std::lock_guard<std::mutex> lock(data_->mutex);
    if (!data_->completions.contains(key)) {
        throw SchemaError("cassette '" + path_ + "' has no completion for request hash " + key);
    }
    return response_from_json(data_->completions.at(key));
}

void Cassette::store_completion(const std::string& key, const CompletionResponse& response) {
    std::lock_guard<std::mutex> lock(data_->mutex);
    data_->completions[key] = response_to_json(response);
    dirty_ = true;
}

bool Cassette::has_embedding(const std::string& key) const {
    std::lock_guard<std::mutex> lock(data_->mutex);
    return data_->embeddings.contains(key);
}

EmbeddingVector Cassette::embedding(const std::string& key) const {
    std::lock_guard<std::mutex> lock(data_->mutex);
    if (!data_->embeddings.contains(key)) {
        throw SchemaError("cassette '" + path_ + "' has no embedding for text hash " + key);
    }
    EmbeddingVector v;
    v.values = data_->embeddings.at(key).get<std::vector<double>>();
    return v;
}

void Cassette::store_embedding(const std::string& key, const EmbeddingVector& vector) {
    std::lock_guard<std::mutex> lock(data_->mutex);
    data_->embeddings[key] = vector.values;
    dirty_ = true;
}

void Cassette::flush() {
    std::lock_guard<std::mutex> lock(data_->mutex);
    if (!dirty_) return;
    std::ofstream out(path_);
    if (!out) throw SchemaError("cannot write cassette '" + path_ + "'");
    nlohmann::json j{{"version", 1},
                     {"completions", data_->completions},
                     {"embeddings", data_->embeddings}};
    out << j.dump(2) << "\n";
    dirty_ = false;
}

CassetteTextBackend::CassetteTextBackend(std::shared_ptr<Cassette> cassette,
                                         std::shared_ptr<TextBackend> inner)
    : cassette_(std::move(cassette)), inner_(std::move(inner)) {
    if (cassette_->mode() == Cassette::Mode::record && !inner_) {
        throw PreconditionError("cassette record mode needs an inner backend");
    }
}

CompletionResponse CassetteTextBackend::complete(const CompletionRequest& request) {
    const auto key = Cassette::completion_key(request);
    if (cassette_->mode() == Cassette::Mode::replay || cassette_->has_completion(key)) {
        return cassette_->completion(key);
    }
    auto response = inner_->complete(request);
    cassette_->store_completion(key, response);
    return response;
}

std::string CassetteTextBackend::id() const {
    return "cassette(" + std::string(cassette_->mode() == Cassette::Mode::replay ? "replay" : "record") +
           (inner_ ? "," + inner_->id() : std::string()) + ")";
}

CassetteEmbeddingBackend::CassetteEmbeddingBackend(std::shared_ptr<Cassette> cassette,
                                                   std::shared_ptr<EmbeddingBackend> inner,
                                                   std::size_t replay_dim)
    : cassette_(std::move(cassette)), inner_(std::move(inner)), replay_dim_(replay_dim) {
    if (cassette_->mode() == Cassette::Mode::record && !inner_) {
        throw PreconditionError("cassette record mode needs an inner backend");
    }
    if (!inner_ && replay_dim_ == 0) {
        throw PreconditionError("cassette replay without inner backend needs replay_dim");
    }
}

EmbeddingVector CassetteEmbeddingBackend::embed(const std::string& text) {
    if (text.empty()) throw PreconditionError("embed: empty text");
    const auto key = Cassette::embedding_key(text);
    if (cassette_->mode() == Cassette::Mode::replay || cassette_->has_embedding(key)) {
        return cassette_->embedding(key);
    }
    auto vector = inner_->embed(text);
    cassette_->store_embedding(key, vector);
    return vector;
}

std::size_t CassetteEmbeddingBackend::dim() const {
    return inner_ ? inner_->dim() : replay_dim_;
}

std::string CassetteEmbeddingBackend::id() const {
    return "cassette-embed(" +
           std::string(cassette_->mode() == Cassette::Mode::replay ? "replay" : "record") +
           (inner_ ? "," + inner_->id() : std::string()) + ")";
}

}  // namespace introplan
