#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "introplan/confidence.hpp"
#include "introplan/domain.hpp"

namespace introplan::conformal {

// Nonconformity of the true label: 1 minus its confidence. Lies in [0, 1].
double nonconformity(const LabelConfidences& confidences, OptionLabel true_label);

// Split-conformal quantile: the k-th smallest score with
// k = ceil((N+1)(1-epsilon_hat)), 1-indexed; 1.0 when k exceeds N (the
// vacuous-but-valid clamp). Scores must be in [0, 1], epsilon_hat in (0, 1).
double calibrate(std::vector<double> scores, double epsilon_hat);

// Every label whose confidence meets or exceeds 1 - q_hat (inclusive, exact
// IEEE comparison). May be empty; never invents labels.
LabelSet predict_set(const LabelConfidences& confidences, double q_hat);

// Eq.-style conditional coverage bound: the delta-quantile of
// Beta(n+1-l, l) with l = floor((n+1) * epsilon_hat); exactly 1.0 when l = 0.
double coverage_lower_bound(int n, double epsilon_hat, double delta);

// Largest epsilon_hat on a 1e-4 grid whose coverage bound still meets
// target_success, restricted to non-vacuous calibrations (l >= 1, i.e.
// q_hat < 1). Throws InfeasibleError when no such grid point exists.
double choose_epsilon_hat(double target_success, int n, double delta);

// ---- Multi-label (powerset) variant ----------------------------------------

// Joint confidence per candidate-label subset. The domain must be the full
// non-empty powerset of one scenario's labels; each value is the normalized
// probability of an exact match and need not sum to 1 across subsets.
using SetConfidences = std::map<LabelSet, double>;

// Same quantile law as `calibrate`, over set-level scores.
double multilabel_calibrate(std::vector<double> scores, double epsilon_hat);

// All subsets meeting the threshold, in canonical subset order (by label
// content, smallest sets of earliest letters first). Throws PreconditionError
// unless the domain is exactly the non-empty powerset of its label union.
std::vector<LabelSet> multilabel_predict(const SetConfidences& set_confidences, double q_hat);

// Certainty rule for a conformant family: the union of all member sets
// contains exactly one label (equivalently, one set and it is a singleton).
bool family_certain(const std::vector<LabelSet>& family);

// Enumerates the non-empty powerset of `labels` in the canonical order used
// by multilabel_predict.
std::vector<LabelSet> nonempty_powerset(const LabelSet& labels);

// ---- Calibration artifact ---------------------------------------------------

struct CalibrationResult {
    double q_hat = 1.0;
    double epsilon_hat = 0.0;
    int n = 0;
    std::optional<double> delta;   // present iff epsilon_hat was delta-adjusted
    double target_success = 0.0;
    std::vector<double> sorted_scores;
    std::string template_version;
    std::string backend_id;
    PredictionMode mode = PredictionMode::conformal_single;

    nlohmann::json to_json() const;
    static CalibrationResult from_json(const nlohmann::json& j);

    void save(const std::string& path) const;
    static CalibrationResult load(const std::string& path);
};

// Produces the artifact for a score sample: picks epsilon_hat from the target
// (delta-adjusted via choose_epsilon_hat when delta is given), runs calibrate,
// and records the sorted scores.
CalibrationResult calibrate_for_target(std::vector<double> scores, double target_success,
                                       std::optional<double> delta, PredictionMode mode,
                                       std::string template_version, std::string backend_id);

}  // namespace introplan::conformal
