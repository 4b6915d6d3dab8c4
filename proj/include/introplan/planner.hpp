#pragma once

#include <optional>
#include <string>
#include <vector>

#include "introplan/backends.hpp"
#include "introplan/conformal.hpp"
#include "introplan/domain.hpp"
#include "introplan/errors.hpp"
#include "introplan/knowledge.hpp"
#include "introplan/prompting.hpp"

namespace introplan::planner {

struct PlannerConfig {
    PredictionMode mode = PredictionMode::direct;
    std::size_t m = 3;  // exemplars retrieved per query
    bool safety_mode = false;
    std::optional<conformal::CalibrationResult> calibration;  // required for conformal modes

    void validate() const;  // throws PreconditionError
};

// Every intermediate of one planning call, persisted to the run log so any
// outcome can be replayed offline.
struct PlanTrace {
    std::vector<std::string> retrieved_ids;
    std::vector<double> retrieved_similarities;
    std::string inference_prompt_hash;
    std::string score_prompt_hash;  // next-token prompt (single) or first subset query (multi)
    std::vector<PlanOption> options;
    std::string rationale;
    LabelSet direct_labels;
    std::map<OptionLabel, double> confidences;                  // conformal_single
    std::vector<std::pair<LabelSet, double>> set_confidences;   // conformal_multi
};

// Wrapper for failures inside the pipeline, carrying the scenario id.
class PlanError : public Error {
public:
    PlanError(const std::string& scenario_id, const std::string& what)
        : Error("scenario '" + scenario_id + "': " + what), scenario_id(scenario_id) {}
    std::string scenario_id;
};

// Retrieval plus fresh candidate/rationale generation through the inference
// prompt: the first half of the deployment pipeline, shared by planning,
// calibration scoring, and sweeps.
struct InferenceResult {
    std::vector<std::string> retrieved_ids;
    std::vector<double> retrieved_similarities;
    std::string inference_prompt_hash;
    std::vector<PlanOption> options;
    std::string rationale;
    LabelSet direct_labels;
};

InferenceResult run_inference(const Scenario& s, const knowledge::KnowledgeBase& kb, std::size_t m,
                              bool safety_mode, TextBackend& backend,
                              EmbeddingBackend& embed_backend,
                              const prompting::TemplateSet& templates);

// Next-token label confidences for the generated candidates.
LabelConfidences label_confidences_for(const Scenario& s, const InferenceResult& inference,
                                       bool safety_mode, TextBackend& backend,
                                       const prompting::TemplateSet& templates,
                                       std::string* prompt_hash = nullptr);

// Joint Y/N confidence for every non-empty candidate subset.
conformal::SetConfidences set_confidences_for(const Scenario& s, const InferenceResult& inference,
                                              bool safety_mode, TextBackend& backend,
                                              const prompting::TemplateSet& templates,
                                              std::string* prompt_hash = nullptr);

// Full deployment pipeline for one scenario: retrieve the m most similar
// exemplars, generate candidates and rationale through the inference prompt,
// then predict directly or conformally. An empty conformal set asks for help.
PredictionOutcome plan(const Scenario& s, const knowledge::KnowledgeBase& kb,
                       const PlannerConfig& config, TextBackend& backend,
                       EmbeddingBackend& embed_backend, const prompting::TemplateSet& templates,
                       PlanTrace* trace = nullptr);

// Simulated clarification: the human (who knows the true intent) picks it
// from the offered set when present; nullopt when the set misses the intent
// entirely, i.e. the planner asked the wrong question.
std::optional<OptionLabel> resolve_help(const PredictionOutcome& outcome, OptionLabel true_intent);

}  // namespace introplan::planner
