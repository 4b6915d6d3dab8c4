#pragma once

#include <memory>
#include <string>

#include "introplan/backends.hpp"

namespace introplan {

// Offline record/replay for backend calls. The cassette file maps a request
// hash to the stored response, bit-exact, so recorded runs replay without
// network access.
class Cassette {
public:
    enum class Mode { record, replay };

    Cassette(std::string path, Mode mode);
    ~Cassette();

    static std::string completion_key(const CompletionRequest& request);
    static std::string embedding_key(const std::string& text);

    bool has_completion(const std::string& key) const;
    CompletionResponse completion(const std::string& key) const;  // throws on miss
    void store_completion(const std::string& key, const CompletionResponse& response);

    bool has_embedding(const std::string& key) const;
    EmbeddingVector embedding(const std::string& key) const;
    void store_embedding(const std::string& key, const EmbeddingVector& vector);

    Mode mode() const { return mode_; }
    void flush();

private:
    struct Data;
    std::string path_;
    Mode mode_;
    std::unique_ptr<Data> data_;
    bool dirty_ = false;
};

// Replay mode answers from the cassette and fails loudly on a miss; record
// mode delegates to the inner backend and persists every response.
class CassetteTextBackend : public TextBackend {
public:
    CassetteTextBackend(std::shared_ptr<Cassette> cassette, std::shared_ptr<TextBackend> inner);

    CompletionResponse complete(const CompletionRequest& request) override;
    std::string id() const override;

private:
    std::shared_ptr<Cassette> cassette_;
    std::shared_ptr<TextBackend> inner_;  // null in pure replay
};

class CassetteEmbeddingBackend : public EmbeddingBackend {
public:
    CassetteEmbeddingBackend(std::shared_ptr<Cassette> cassette,
                             std::shared_ptr<EmbeddingBackend> inner, std::size_t replay_dim = 0);

    EmbeddingVector embed(const std::string& text) override;
    std::size_t dim() const override;
    std::string id() const override;

private:
    std::shared_ptr<Cassette> cassette_;
    std::shared_ptr<EmbeddingBackend> inner_;
    std::size_t replay_dim_;
};

}  // namespace introplan
