#pragma once

#include <memory>
#include <string>
#include <vector>

#include "introplan/confidence.hpp"
#include "introplan/domain.hpp"

namespace introplan {

struct CompletionRequest {
    std::string prompt;
    int max_tokens = 256;
    double temperature = 0.0;  // deterministic sampling by default
    int logprob_top_k = 0;     // 0 = no logprobs requested
};

struct TokenLogprob {
    std::string token;
    double logprob = 0.0;

    bool operator==(const TokenLogprob&) const = default;
};

struct CompletionResponse {
    std::string text;
    // Top-k alternatives per generated position; empty unless requested.
    std::vector<std::vector<TokenLogprob>> top_logprobs;
};

// Text-generation provider. Implementations must be safe for concurrent
// complete() calls up to the caller's in-flight limit.
class TextBackend {
public:
    virtual ~TextBackend() = default;
    virtual CompletionResponse complete(const CompletionRequest& request) = 0;
    // Stable identifier recorded in artifacts for provenance.
    virtual std::string id() const = 0;
};

class EmbeddingBackend {
public:
    virtual ~EmbeddingBackend() = default;
    virtual EmbeddingVector embed(const std::string& text) = 0;
    virtual std::size_t dim() const = 0;
    virtual std::string id() const = 0;
};

// Turns one position's top-k logprobs into a normalized distribution over
// the given labels: a token counts for a label when its whitespace-trimmed
// text equals the letter (ties take the max logprob), absent labels get
// weight zero, and the result is renormalized to sum to 1. Throws
// DegenerateDistributionError when no label matches at all.
LabelConfidences extract_label_confidences(const std::vector<TokenLogprob>& top,
                                           const std::vector<OptionLabel>& labels);

// Asks the backend for one token with logprobs and extracts label
// confidences from the first position. Labels must be non-empty and unique.
LabelConfidences score_labels(TextBackend& backend, const std::string& prompt,
                              const std::vector<OptionLabel>& labels);

}  // namespace introplan
