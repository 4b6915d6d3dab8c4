#pragma once

#include <map>
#include <string>
#include <vector>

#include "introplan/domain.hpp"

namespace introplan {

// Normalized per-label confidence over exactly the candidate labels of one
// scenario. Values are non-negative and sum to 1 (within 1e-9).
class LabelConfidences {
public:
    LabelConfidences() = default;

    // Normalizes the raw non-negative weights. Throws PreconditionError when
    // empty or when every weight is zero.
    static LabelConfidences from_weights(const std::map<OptionLabel, double>& weights);

    double at(OptionLabel label) const;  // throws PreconditionError when absent
    bool contains(OptionLabel label) const { return entries_.count(label) > 0; }
    // Lvalue-only: iterating entries() of a temporary would dangle.
    const std::map<OptionLabel, double>& entries() const& { return entries_; }
    const std::map<OptionLabel, double>& entries() && = delete;
    std::size_t size() const { return entries_.size(); }

    LabelSet labels() const;
    OptionLabel argmax() const;

private:
    std::map<OptionLabel, double> entries_;
};

// Dense text embedding; dimension is uniform within one knowledge base.
struct EmbeddingVector {
    std::vector<double> values;

    std::size_t dim() const { return values.size(); }
    double norm() const;

    bool operator==(const EmbeddingVector&) const = default;
};

// dot(u, v) / (|u| * |v|); throws PreconditionError on dimension mismatch or
// zero-norm input. Result lies in [-1, 1] up to rounding.
double cosine_similarity(const EmbeddingVector& u, const EmbeddingVector& v);

}  // namespace introplan
