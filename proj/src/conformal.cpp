#include "introplan/conformal.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "introplan/betadist.hpp"
#include "introplan/errors.hpp"

namespace introplan::conformal {

namespace {

// floor/ceil with a relative nudge so integer-valued products such as
// (N+1)*0.75 are not pushed across the boundary by representation error.
long floor_index(double x) { return static_cast<long>(std::floor(x + 1e-9)); }
long ceil_index(double x) { return static_cast<long>(std::ceil(x - 1e-9)); }

double quantile_of_sorted(const std::vector<double>& sorted, double epsilon_hat) {
    const auto n = static_cast<long>(sorted.size());
    long k = ceil_index((n + 1) * (1.0 - epsilon_hat));
    if (k > n) return 1.0;
    if (k < 1) k = 1;
    return sorted[static_cast<std::size_t>(k - 1)];
}

double calibrate_impl(std::vector<double> scores, double epsilon_hat, const char* who) {
    if (scores.empty()) throw PreconditionError(std::string(who) + ": empty score sample");
    if (!(epsilon_hat > 0.0 && epsilon_hat < 1.0)) {
        throw PreconditionError(std::string(who) + ": epsilon_hat must lie in (0, 1)");
    }
    for (double s : scores) {
        if (!(s >= 0.0 && s <= 1.0)) {
            throw PreconditionError(std::string(who) + ": score outside [0, 1]");
        }
    }
    std::stable_sort(scores.begin(), scores.end());
    return quantile_of_sorted(scores, epsilon_hat);
}

}  // namespace

double nonconformity(const LabelConfidences& confidences, OptionLabel true_label) {
    return 1.0 - confidences.at(true_label);
}

double calibrate(std::vector<double> scores, double epsilon_hat) {
    return calibrate_impl(std::move(scores), epsilon_hat, "calibrate");
}

LabelSet predict_set(const LabelConfidences& confidences, double q_hat) {
    if (!(q_hat >= 0.0 && q_hat <= 1.0)) {
        throw PreconditionError("predict_set: q_hat must lie in [0, 1]");
    }
    LabelSet out;
    const double threshold = 1.0 - q_hat;
    for (const auto& [label, confidence] : confidences.entries()) {
        if (confidence >= threshold) out.insert(label);
    }
    return out;
}

double coverage_lower_bound(int n, double epsilon_hat, double delta) {
    if (n < 1) throw PreconditionError("coverage_lower_bound: n must be >= 1");
    if (!(epsilon_hat > 0.0 && epsilon_hat < 1.0)) {
        throw PreconditionError("coverage_lower_bound: epsilon_hat must lie in (0, 1)");
    }
    if (!(delta > 0.0 && delta < 1.0)) {
        throw PreconditionError("coverage_lower_bound: delta must lie in (0, 1)");
    }
    long l = floor_index((n + 1) * epsilon_hat);
    if (l == 0) return 1.0;  // degenerate Beta: coverage is 1 with certainty
    return stats::beta_quantile(delta, static_cast<double>(n + 1 - l), static_cast<double>(l));
}

double choose_epsilon_hat(double target_success, int n, double delta) {
    if (!(target_success > 0.0 && target_success < 1.0)) {
        throw PreconditionError("choose_epsilon_hat: target_success must lie in (0, 1)");
    }
    constexpr double kGrid = 1e-4;
    constexpr long kSteps = 9999;  // grid covers (0, 1) exclusive

    // Grid points below 1/(n+1) give l = 0: q_hat clamps to 1 and the
    // prediction set is everything, so they cannot serve as a calibration
    // level. The feasible region starts at the first non-vacuous point.
    long i_min = kSteps + 1;
    for (long i = 1; i <= kSteps; ++i) {
        if (floor_index((n + 1) * (i * kGrid)) >= 1) {
            i_min = i;
            break;
        }
    }
    if (i_min > kSteps || coverage_lower_bound(n, i_min * kGrid, delta) < target_success) {
        throw InfeasibleError("choose_epsilon_hat: no non-vacuous epsilon on the 1e-4 grid meets "
                              "target " + std::to_string(target_success) + " at n=" +
                              std::to_string(n) + ", delta=" + std::to_string(delta));
    }
    // The bound is non-increasing in epsilon_hat, so binary-search the
    // largest grid index that still meets the target.
    long lo = i_min;  // feasible
    long hi = kSteps;
    while (lo < hi) {
        long mid = lo + (hi - lo + 1) / 2;
        if (coverage_lower_bound(n, mid * kGrid, delta) >= target_success) {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    return lo * kGrid;
}

double multilabel_calibrate(std::vector<double> scores, double epsilon_hat) {
    return calibrate_impl(std::move(scores), epsilon_hat, "multilabel_calibrate");
}

std::vector<LabelSet> nonempty_powerset(const LabelSet& labels) {
    std::vector<OptionLabel> ordered(labels.begin(), labels.end());
    const std::size_t k = ordered.size();
    if (k > 20) throw PreconditionError("nonempty_powerset: too many labels");
    std::vector<LabelSet> out;
    out.reserve((std::size_t{1} << k) - 1);
    for (std::uint32_t mask = 1; mask < (1u << k); ++mask) {
        LabelSet subset;
        for (std::size_t bit = 0; bit < k; ++bit) {
            if (mask & (1u << bit)) subset.insert(ordered[bit]);
        }
        out.push_back(std::move(subset));
    }
    return out;
}

std::vector<LabelSet> multilabel_predict(const SetConfidences& set_confidences, double q_hat) {
    if (!(q_hat >= 0.0 && q_hat <= 1.0)) {
        throw PreconditionError("multilabel_predict: q_hat must lie in [0, 1]");
    }
    if (set_confidences.empty()) {
        throw PreconditionError("multilabel_predict: empty confidence map");
    }
    LabelSet all_labels;
    for (const auto& [subset, _] : set_confidences) {
        if (subset.empty()) {
            throw PreconditionError("multilabel_predict: empty subset in domain");
        }
        all_labels.insert(subset.begin(), subset.end());
    }
    auto expected = nonempty_powerset(all_labels);
    if (set_confidences.size() != expected.size()) {
        throw PreconditionError("multilabel_predict: domain has " +
                                std::to_string(set_confidences.size()) + " subsets, expected the "
                                "full non-empty powerset of " +
                                std::to_string(all_labels.size()) + " labels (" +
                                std::to_string(expected.size()) + ")");
    }
    const double threshold = 1.0 - q_hat;
    std::vector<LabelSet> family;
    for (const auto& subset : expected) {
        auto it = set_confidences.find(subset);
        if (it == set_confidences.end()) {
            throw PreconditionError("multilabel_predict: subset " + label_set_to_string(subset) +
                                    " missing from domain");
        }
        if (it->second >= threshold) family.push_back(subset);
    }
    return family;
}

bool family_certain(const std::vector<LabelSet>& family) {
    LabelSet label_union;
    for (const auto& s : family) label_union.insert(s.begin(), s.end());
    return label_union.size() == 1;
}

nlohmann::json CalibrationResult::to_json() const {
    nlohmann::json j{{"q_hat", q_hat},
                     {"epsilon_hat", epsilon_hat},
                     {"n", n},
                     {"target_success", target_success},
                     {"sorted_scores", sorted_scores},
                     {"template_version", template_version},
                     {"backend_id", backend_id},
                     {"mode", to_string(mode)}};
    j["delta"] = delta ? nlohmann::json(*delta) : nlohmann::json(nullptr);
    return j;
}

CalibrationResult CalibrationResult::from_json(const nlohmann::json& j) {
    CalibrationResult r;
    r.q_hat = j.at("q_hat").get<double>();
    r.epsilon_hat = j.at("epsilon_hat").get<double>();
    r.n = j.at("n").get<int>();
    if (j.contains("delta") && !j.at("delta").is_null()) r.delta = j.at("delta").get<double>();
    r.target_success = j.value("target_success", 0.0);
    r.sorted_scores = j.at("sorted_scores").get<std::vector<double>>();
    r.template_version = j.value("template_version", "");
    r.backend_id = j.value("backend_id", "");
    r.mode = prediction_mode_from_string(j.value("mode", "conformal_single"));
    return r;
}

void CalibrationResult::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw SchemaError("cannot write calibration artifact '" + path + "'");
    out << to_json().dump(2) << "\n";
}

CalibrationResult CalibrationResult::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SchemaError("cannot open calibration artifact '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
        return from_json(j);
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError("calibration artifact '" + path + "': " + e.what());
    }
}

CalibrationResult calibrate_for_target(std::vector<double> scores, double target_success,
                                       std::optional<double> delta, PredictionMode mode,
                                       std::string template_version, std::string backend_id) {
    CalibrationResult result;
    result.n = static_cast<int>(scores.size());
    result.target_success = target_success;
    result.delta = delta;
    result.mode = mode;
    result.template_version = std::move(template_version);
    result.backend_id = std::move(backend_id);
    result.epsilon_hat = delta ? choose_epsilon_hat(target_success, result.n, *delta)
                               : 1.0 - target_success;
    result.q_hat = calibrate(scores, result.epsilon_hat);
    std::stable_sort(scores.begin(), scores.end());
    result.sorted_scores = std::move(scores);
    return result;
}

}  // namespace introplan::conformal
