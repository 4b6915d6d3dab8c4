#include "introplan/confidence.hpp"

#include <cmath>

#include "introplan/errors.hpp"

namespace introplan {

LabelConfidences LabelConfidences::from_weights(const std::map<OptionLabel, double>& weights) {
    if (weights.empty()) throw PreconditionError("LabelConfidences: no labels");
    double total = 0.0;
    for (const auto& [label, w] : weights) {
        if (!(w >= 0.0) || !std::isfinite(w)) {
            throw PreconditionError("LabelConfidences: weight for " + label.str() +
                                    " is negative or non-finite");
        }
        total += w;
    }
    if (total <= 0.0) throw PreconditionError("LabelConfidences: all weights are zero");
    LabelConfidences out;
    for (const auto& [label, w] : weights) out.entries_[label] = w / total;
    return out;
}

double LabelConfidences::at(OptionLabel label) const {
    auto it = entries_.find(label);
    if (it == entries_.end()) {
        throw PreconditionError("LabelConfidences: label " + label.str() + " not in domain");
    }
    return it->second;
}

LabelSet LabelConfidences::labels() const {
    LabelSet out;
    for (const auto& [label, _] : entries_) out.insert(label);
    return out;
}

OptionLabel LabelConfidences::argmax() const {
    if (entries_.empty()) throw PreconditionError("LabelConfidences: empty");
    auto best = entries_.begin();
    for (auto it = entries_.begin(); it != entries_.end(); ++it) {
        if (it->second > best->second) best = it;
    }
    return best->first;
}

double EmbeddingVector::norm() const {
    double sq = 0.0;
    for (double v : values) sq += v * v;
    return std::sqrt(sq);
}

double cosine_similarity(const EmbeddingVector& u, const EmbeddingVector& v) {
    if (u.dim() != v.dim()) {
        throw PreconditionError("cosine_similarity: dimension mismatch (" +
                                std::to_string(u.dim()) + " vs " + std::to_string(v.dim()) + ")");
    }
    if (u.dim() == 0) throw PreconditionError("cosine_similarity: empty vectors");
    double dot = 0.0;
    for (std::size_t i = 0; i < u.values.size(); ++i) dot += u.values[i] * v.values[i];
    double nu = u.norm();
    double nv = v.norm();
    if (nu == 0.0 || nv == 0.0) throw PreconditionError("cosine_similarity: zero-norm vector");
    return dot / (nu * nv);
}

}  // namespace introplan
