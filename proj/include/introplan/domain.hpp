#pragma once

#include <compare>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

namespace introplan {

// The candidate the model must pick when no listed plan should be executed.
inline constexpr const char* kEscapeOptionText = "an option not listed here";

// Letter label of a candidate plan within one scenario ('A'..'Z').
class OptionLabel {
public:
    OptionLabel() = default;
    explicit OptionLabel(char letter);

    static OptionLabel from_index(std::size_t index);  // 0 -> 'A', 1 -> 'B', ...

    char letter() const { return letter_; }
    std::size_t index() const { return static_cast<std::size_t>(letter_ - 'A'); }
    std::string str() const { return std::string(1, letter_); }

    auto operator<=>(const OptionLabel&) const = default;

private:
    char letter_ = 'A';
};

using LabelSet = std::set<OptionLabel>;

std::string label_set_to_string(const LabelSet& labels);  // "{A, C}"

struct PlanOption {
    OptionLabel label;
    std::string text;
    bool is_valid = false;
    bool is_unsafe = false;
    bool is_intent = false;
    bool is_escape = false;

    bool operator==(const PlanOption&) const = default;
};

enum class ScenarioKind {
    unambiguous,
    single_label,
    multi_label,
    spatially_ambiguous,
    unsafe,
    winograd,
    creative,
    unsafe_ambiguous,
    serious_unsafe,
};

std::string to_string(ScenarioKind kind);
ScenarioKind scenario_kind_from_string(const std::string& name);

// One planning task: scene, instruction, and (optionally ground-truth
// labelled) candidate options. Immutable by convention after construction.
struct Scenario {
    std::string id;
    std::string scene;
    std::string instruction;
    std::string observation;  // may equal scene
    ScenarioKind kind = ScenarioKind::unambiguous;
    std::vector<PlanOption> options;

    bool operator==(const Scenario&) const = default;

    // Ground truth is considered populated when any option is flagged valid.
    bool has_ground_truth() const;
    LabelSet valid_labels() const;
    std::optional<OptionLabel> intent_label() const;
    LabelSet unsafe_labels() const;
    std::optional<OptionLabel> escape_label() const;
    const PlanOption* find_option(OptionLabel label) const;
};

enum class PredictionMode { direct, conformal_single, conformal_multi };

std::string to_string(PredictionMode mode);
PredictionMode prediction_mode_from_string(const std::string& name);

// Result of planning one scenario. Single-label modes fill `prediction_set`;
// the multi-label mode fills `family` and `prediction_set` holds its union.
struct PredictionOutcome {
    std::string scenario_id;
    PredictionMode mode = PredictionMode::direct;
    LabelSet prediction_set;
    std::vector<LabelSet> family;  // conformal_multi only
    bool certain = false;
    bool asked_for_help = false;

    bool operator==(const PredictionOutcome&) const = default;

    // Union of the family (multi-label) or the prediction set itself.
    LabelSet flattened() const;
};

// Builds an outcome with certain/asked_for_help derived from the set:
// certain iff exactly one label survives; anything else (including the
// empty conformal set) asks for help.
PredictionOutcome make_single_outcome(std::string scenario_id, PredictionMode mode,
                                      LabelSet prediction_set);
PredictionOutcome make_multi_outcome(std::string scenario_id, std::vector<LabelSet> family);

// Checks every domain invariant; returns one human-readable description per
// violation, empty when the scenario is well formed. Never throws on bad data.
std::vector<std::string> validate_scenario(const Scenario& s);

// Assigns letters A.. to plan texts in order, flags defaulted; texts equal to
// the escape sentence are flagged is_escape. Throws CapacityError above 26.
std::vector<PlanOption> assign_labels(const std::vector<std::string>& texts);

// JSON (de)serialization; field names match the dataset schema exactly.
nlohmann::json to_json(const PlanOption& option);
nlohmann::json to_json(const Scenario& scenario);
nlohmann::json to_json(const PredictionOutcome& outcome);
PlanOption plan_option_from_json(const nlohmann::json& j);
Scenario scenario_from_json(const nlohmann::json& j);
PredictionOutcome prediction_outcome_from_json(const nlohmann::json& j);

// Line-delimited scenario files. Loading validates every scenario and throws
// SchemaError naming the offending line.
std::vector<Scenario> load_scenarios_jsonl(const std::string& path);
void save_scenarios_jsonl(const std::vector<Scenario>& scenarios, const std::string& path);

}  // namespace introplan
