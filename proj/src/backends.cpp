#include "introplan/backends.hpp"

#include <cmath>
#include <set>

#include "introplan/errors.hpp"

namespace introplan {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

}  // namespace

LabelConfidences extract_label_confidences(const std::vector<TokenLogprob>& top,
                                           const std::vector<OptionLabel>& labels) {
    if (labels.empty()) throw PreconditionError("extract_label_confidences: no labels");
    std::set<OptionLabel> seen;
    for (const auto& l : labels) {
        if (!seen.insert(l).second) {
            throw PreconditionError("extract_label_confidences: duplicate label " + l.str());
        }
    }

    std::map<OptionLabel, double> weights;
    bool any_match = false;
    for (const auto& label : labels) {
        double best_logprob = 0.0;
        bool matched = false;
        for (const auto& entry : top) {
            if (trim(entry.token) != label.str()) continue;
            if (!matched || entry.logprob > best_logprob) best_logprob = entry.logprob;
            matched = true;
        }
        if (matched) {
            weights[label] = std::exp(best_logprob);
            any_match = true;
        } else {
            weights[label] = 0.0;
        }
    }
    if (!any_match) {
        throw DegenerateDistributionError(
            "extract_label_confidences: none of the labels appear in the top-k logprobs");
    }
    return LabelConfidences::from_weights(weights);
}

LabelConfidences score_labels(TextBackend& backend, const std::string& prompt,
                              const std::vector<OptionLabel>& labels) {
    if (labels.empty()) throw PreconditionError("score_labels: no labels");
    CompletionRequest request;
    request.prompt = prompt;
    request.max_tokens = 1;
    request.temperature = 0.0;
    request.logprob_top_k = 20;
    auto response = backend.complete(request);
    if (response.top_logprobs.empty()) {
        throw DegenerateDistributionError("score_labels: backend returned no logprobs");
    }
    return extract_label_confidences(response.top_logprobs.front(), labels);
}

}  // namespace introplan
