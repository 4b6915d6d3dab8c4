#include "introplan/domain.hpp"

#include <fstream>
#include <sstream>

#include "introplan/errors.hpp"

namespace introplan {

OptionLabel::OptionLabel(char letter) : letter_(letter) {
    if (letter < 'A' || letter > 'Z') {
        throw PreconditionError(std::string("option label must be 'A'..'Z', got '") + letter + "'");
    }
}

OptionLabel OptionLabel::from_index(std::size_t index) {
    if (index >= 26) throw CapacityError("label alphabet exhausted (index " + std::to_string(index) + ")");
    return OptionLabel(static_cast<char>('A' + index));
}

std::string label_set_to_string(const LabelSet& labels) {
    std::string out = "{";
    bool first = true;
    for (const auto& l : labels) {
        if (!first) out += ", ";
        out += l.letter();
        first = false;
    }
    out += "}";
    return out;
}

std::string to_string(ScenarioKind kind) {
    switch (kind) {
        case ScenarioKind::unambiguous: return "unambiguous";
        case ScenarioKind::single_label: return "single_label";
        case ScenarioKind::multi_label: return "multi_label";
        case ScenarioKind::spatially_ambiguous: return "spatially_ambiguous";
        case ScenarioKind::unsafe: return "unsafe";
        case ScenarioKind::winograd: return "winograd";
        case ScenarioKind::creative: return "creative";
        case ScenarioKind::unsafe_ambiguous: return "unsafe_ambiguous";
        case ScenarioKind::serious_unsafe: return "serious_unsafe";
    }
    throw Error("unreachable scenario kind");
}

ScenarioKind scenario_kind_from_string(const std::string& name) {
    for (int k = 0; k <= static_cast<int>(ScenarioKind::serious_unsafe); ++k) {
        auto kind = static_cast<ScenarioKind>(k);
        if (to_string(kind) == name) return kind;
    }
    throw SchemaError("unknown scenario kind '" + name + "'");
}

bool Scenario::has_ground_truth() const {
    for (const auto& o : options) {
        if (o.is_valid) return true;
    }
    return false;
}

LabelSet Scenario::valid_labels() const {
    LabelSet out;
    for (const auto& o : options) {
        if (o.is_valid) out.insert(o.label);
    }
    return out;
}

std::optional<OptionLabel> Scenario::intent_label() const {
    for (const auto& o : options) {
        if (o.is_intent) return o.label;
    }
    return std::nullopt;
}

LabelSet Scenario::unsafe_labels() const {
    LabelSet out;
    for (const auto& o : options) {
        if (o.is_unsafe) out.insert(o.label);
    }
    return out;
}

std::optional<OptionLabel> Scenario::escape_label() const {
    for (const auto& o : options) {
        if (o.is_escape) return o.label;
    }
    return std::nullopt;
}

const PlanOption* Scenario::find_option(OptionLabel label) const {
    for (const auto& o : options) {
        if (o.label == label) return &o;
    }
    return nullptr;
}

std::string to_string(PredictionMode mode) {
    switch (mode) {
        case PredictionMode::direct: return "direct";
        case PredictionMode::conformal_single: return "conformal_single";
        case PredictionMode::conformal_multi: return "conformal_multi";
    }
    throw Error("unreachable prediction mode");
}

PredictionMode prediction_mode_from_string(const std::string& name) {
    if (name == "direct") return PredictionMode::direct;
    if (name == "conformal_single") return PredictionMode::conformal_single;
    if (name == "conformal_multi") return PredictionMode::conformal_multi;
    throw SchemaError("unknown prediction mode '" + name + "'");
}

LabelSet PredictionOutcome::flattened() const {
    if (mode != PredictionMode::conformal_multi) return prediction_set;
    LabelSet out;
    for (const auto& s : family) out.insert(s.begin(), s.end());
    return out;
}

PredictionOutcome make_single_outcome(std::string scenario_id, PredictionMode mode,
                                      LabelSet prediction_set) {
    PredictionOutcome out;
    out.scenario_id = std::move(scenario_id);
    out.mode = mode;
    out.certain = prediction_set.size() == 1;
    out.asked_for_help = !out.certain;
    out.prediction_set = std::move(prediction_set);
    return out;
}

PredictionOutcome make_multi_outcome(std::string scenario_id, std::vector<LabelSet> family) {
    PredictionOutcome out;
    out.scenario_id = std::move(scenario_id);
    out.mode = PredictionMode::conformal_multi;
    out.family = std::move(family);
    out.prediction_set = out.flattened();
    // Certain iff the family is a single singleton, i.e. its union has size 1.
    out.certain = out.prediction_set.size() == 1 && out.family.size() == 1;
    out.asked_for_help = !out.certain;
    return out;
}

std::vector<std::string> validate_scenario(const Scenario& s) {
    std::vector<std::string> violations;
    auto report = [&](const std::string& msg) {
        violations.push_back("scenario '" + s.id + "': " + msg);
    };

    if (s.id.empty()) report("id is empty");
    if (s.options.size() > 26) report("more than 26 options");

    std::size_t intent_count = 0;
    for (std::size_t i = 0; i < s.options.size(); ++i) {
        const auto& o = s.options[i];
        char expected = static_cast<char>('A' + i);
        if (i < 26 && o.label.letter() != expected) {
            report(std::string("option ") + std::to_string(i) + " labelled '" + o.label.letter() +
                   "', expected '" + expected + "' (labels must run A.. in order)");
        }
        if (o.is_intent) {
            ++intent_count;
            if (!o.is_valid) {
                report(std::string("intent option '") + o.label.letter() + "' is not valid");
            }
        }
        if (o.is_escape && o.text != kEscapeOptionText) {
            report(std::string("escape option '") + o.label.letter() + "' has text \"" + o.text +
                   "\" instead of \"" + kEscapeOptionText + "\"");
        }
    }
    if (intent_count > 1) {
        report("has " + std::to_string(intent_count) + " intent options (at most one allowed)");
    }

    if (s.has_ground_truth()) {
        auto valid = s.valid_labels();
        if (s.kind == ScenarioKind::unambiguous && valid.size() != 1) {
            report("unambiguous scenario has " + std::to_string(valid.size()) +
                   " valid options, expected exactly 1");
        }
        if (s.kind == ScenarioKind::serious_unsafe) {
            auto escape = s.escape_label();
            bool ok = escape.has_value() && valid.size() == 1 && *valid.begin() == *escape;
            if (!ok) {
                report("serious_unsafe scenario must have the escape option as its only valid option");
            }
        }
    }
    return violations;
}

std::vector<PlanOption> assign_labels(const std::vector<std::string>& texts) {
    if (texts.empty()) throw PreconditionError("assign_labels: no plan texts given");
    if (texts.size() > 26) {
        throw CapacityError("assign_labels: " + std::to_string(texts.size()) +
                            " plans exceed the 26-letter alphabet");
    }
    std::vector<PlanOption> options;
    options.reserve(texts.size());
    for (std::size_t i = 0; i < texts.size(); ++i) {
        PlanOption o;
        o.label = OptionLabel::from_index(i);
        o.text = texts[i];
        o.is_escape = texts[i] == kEscapeOptionText;
        options.push_back(std::move(o));
    }
    return options;
}

nlohmann::json to_json(const PlanOption& option) {
    return nlohmann::json{{"label", option.label.str()},
                          {"text", option.text},
                          {"is_valid", option.is_valid},
                          {"is_unsafe", option.is_unsafe},
                          {"is_intent", option.is_intent},
                          {"is_escape", option.is_escape}};
}

nlohmann::json to_json(const Scenario& scenario) {
    nlohmann::json options = nlohmann::json::array();
    for (const auto& o : scenario.options) options.push_back(to_json(o));
    return nlohmann::json{{"id", scenario.id},
                          {"scene", scenario.scene},
                          {"instruction", scenario.instruction},
                          {"observation", scenario.observation},
                          {"kind", to_string(scenario.kind)},
                          {"options", std::move(options)}};
}

nlohmann::json to_json(const PredictionOutcome& outcome) {
    nlohmann::json set = nlohmann::json::array();
    for (const auto& l : outcome.prediction_set) set.push_back(l.str());
    nlohmann::json j{{"scenario_id", outcome.scenario_id},
                     {"mode", to_string(outcome.mode)},
                     {"prediction_set", std::move(set)},
                     {"certain", outcome.certain},
                     {"asked_for_help", outcome.asked_for_help}};
    if (outcome.mode == PredictionMode::conformal_multi) {
        nlohmann::json family = nlohmann::json::array();
        for (const auto& s : outcome.family) {
            nlohmann::json inner = nlohmann::json::array();
            for (const auto& l : s) inner.push_back(l.str());
            family.push_back(std::move(inner));
        }
        j["family"] = std::move(family);
    }
    return j;
}

namespace {

OptionLabel label_from_json(const nlohmann::json& j) {
    auto s = j.get<std::string>();
    if (s.size() != 1) throw SchemaError("label must be a single letter, got \"" + s + "\"");
    try {
        return OptionLabel(s[0]);
    } catch (const PreconditionError& e) {
        throw SchemaError(e.what());
    }
}

}  // namespace

PlanOption plan_option_from_json(const nlohmann::json& j) {
    PlanOption o;
    o.label = label_from_json(j.at("label"));
    o.text = j.at("text").get<std::string>();
    o.is_valid = j.value("is_valid", false);
    o.is_unsafe = j.value("is_unsafe", false);
    o.is_intent = j.value("is_intent", false);
    o.is_escape = j.value("is_escape", false);
    return o;
}

Scenario scenario_from_json(const nlohmann::json& j) {
    Scenario s;
    s.id = j.at("id").get<std::string>();
    s.scene = j.at("scene").get<std::string>();
    s.instruction = j.at("instruction").get<std::string>();
    s.observation = j.value("observation", s.scene);
    s.kind = scenario_kind_from_string(j.at("kind").get<std::string>());
    for (const auto& oj : j.value("options", nlohmann::json::array())) {
        s.options.push_back(plan_option_from_json(oj));
    }
    return s;
}

PredictionOutcome prediction_outcome_from_json(const nlohmann::json& j) {
    PredictionOutcome out;
    out.scenario_id = j.at("scenario_id").get<std::string>();
    out.mode = prediction_mode_from_string(j.at("mode").get<std::string>());
    for (const auto& lj : j.at("prediction_set")) out.prediction_set.insert(label_from_json(lj));
    if (j.contains("family")) {
        for (const auto& sj : j.at("family")) {
            LabelSet set;
            for (const auto& lj : sj) set.insert(label_from_json(lj));
            out.family.push_back(std::move(set));
        }
    }
    out.certain = j.at("certain").get<bool>();
    out.asked_for_help = j.at("asked_for_help").get<bool>();
    return out;
}

std::vector<Scenario> load_scenarios_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SchemaError("cannot open dataset file '" + path + "'");
    std::vector<Scenario> scenarios;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        Scenario s;
        try {
            s = scenario_from_json(nlohmann::json::parse(line));
        } catch (const nlohmann::json::exception& e) {
            throw SchemaError(path + ":" + std::to_string(line_no) + ": " + e.what(), line_no);
        } catch (const SchemaError& e) {
            throw SchemaError(path + ":" + std::to_string(line_no) + ": " + e.what(), line_no);
        }
        auto violations = validate_scenario(s);
        if (!violations.empty()) {
            throw SchemaError(path + ":" + std::to_string(line_no) + ": " + violations.front(),
                              line_no);
        }
        scenarios.push_back(std::move(s));
    }
    return scenarios;
}

void save_scenarios_jsonl(const std::vector<Scenario>& scenarios, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw SchemaError("cannot write dataset file '" + path + "'");
    for (const auto& s : scenarios) {
        out << to_json(s).dump() << "\n";
    }
}

}  // namespace introplan
