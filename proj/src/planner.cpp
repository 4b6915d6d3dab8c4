#include "introplan/planner.hpp"

#include "introplan/errors.hpp"
#include "introplan/rng.hpp"

namespace introplan::planner {

void PlannerConfig::validate() const {
    if (m < 1) throw PreconditionError("planner config: m must be >= 1");
    const bool conformal = mode != PredictionMode::direct;
    if (conformal && !calibration) {
        throw PreconditionError("planner config: " + to_string(mode) +
                                " mode requires a calibration artifact");
    }
    if (!conformal && calibration) {
        throw PreconditionError("planner config: direct mode must not carry a calibration artifact");
    }
    if (calibration && calibration->mode != mode) {
        throw PreconditionError("planner config: calibration artifact was produced for " +
                                to_string(calibration->mode) + ", not " + to_string(mode));
    }
}

InferenceResult run_inference(const Scenario& s, const knowledge::KnowledgeBase& kb, std::size_t m,
                              bool safety_mode, TextBackend& backend,
                              EmbeddingBackend& embed_backend,
                              const prompting::TemplateSet& templates) {
    auto hits = knowledge::retrieve_similar(s.instruction, kb, m, embed_backend);
    std::vector<prompting::ExemplarBlock> exemplars;
    exemplars.reserve(hits.size());
    InferenceResult result;
    for (const auto& hit : hits) {
        exemplars.push_back(knowledge::to_exemplar(*hit.entry));
        result.retrieved_ids.push_back(hit.entry->scenario.id);
        result.retrieved_similarities.push_back(hit.similarity);
    }

    prompting::RenderOptions render_opts{safety_mode, -1};
    auto prompt = prompting::render_inference_prompt(s, exemplars, templates, render_opts);
    result.inference_prompt_hash = rng::to_hex(rng::fnv1a64(prompt));

    CompletionRequest request;
    request.prompt = prompt;
    request.max_tokens = 512;
    auto parsed = prompting::parse_inference_output(backend.complete(request).text);
    result.options = std::move(parsed.options);
    result.rationale = std::move(parsed.rationale);
    result.direct_labels = std::move(parsed.direct_labels);
    return result;
}

LabelConfidences label_confidences_for(const Scenario& s, const InferenceResult& inference,
                                       bool safety_mode, TextBackend& backend,
                                       const prompting::TemplateSet& templates,
                                       std::string* prompt_hash) {
    prompting::RenderOptions render_opts{safety_mode, -1};
    auto prompt = prompting::render_next_token_prompt(s, inference.options, inference.rationale,
                                                      templates, render_opts);
    if (prompt_hash) *prompt_hash = rng::to_hex(rng::fnv1a64(prompt));
    std::vector<OptionLabel> labels;
    labels.reserve(inference.options.size());
    for (const auto& o : inference.options) labels.push_back(o.label);
    return score_labels(backend, prompt, labels);
}

conformal::SetConfidences set_confidences_for(const Scenario& s, const InferenceResult& inference,
                                              bool safety_mode, TextBackend& backend,
                                              const prompting::TemplateSet& templates,
                                              std::string* prompt_hash) {
    prompting::RenderOptions render_opts{safety_mode, -1};
    LabelSet all_labels;
    for (const auto& o : inference.options) all_labels.insert(o.label);

    conformal::SetConfidences set_confidences;
    const std::vector<OptionLabel> yes_no = {OptionLabel('Y'), OptionLabel('N')};
    bool first = true;
    for (const auto& subset : conformal::nonempty_powerset(all_labels)) {
        auto query = prompting::render_multilabel_query(subset, s, inference.options,
                                                        inference.rationale, templates, render_opts);
        if (prompt_hash && first) {
            *prompt_hash = rng::to_hex(rng::fnv1a64(query));
            first = false;
        }
        auto confidences = score_labels(backend, query, yes_no);
        set_confidences[subset] = confidences.at(OptionLabel('Y'));
    }
    return set_confidences;
}

PredictionOutcome plan(const Scenario& s, const knowledge::KnowledgeBase& kb,
                       const PlannerConfig& config, TextBackend& backend,
                       EmbeddingBackend& embed_backend, const prompting::TemplateSet& templates,
                       PlanTrace* trace) {
    config.validate();
    if (kb.empty()) throw PreconditionError("plan: knowledge base is empty");

    try {
        auto inference = run_inference(s, kb, config.m, config.safety_mode, backend, embed_backend,
                                       templates);
        if (trace) {
            trace->retrieved_ids = inference.retrieved_ids;
            trace->retrieved_similarities = inference.retrieved_similarities;
            trace->inference_prompt_hash = inference.inference_prompt_hash;
            trace->options = inference.options;
            trace->rationale = inference.rationale;
            trace->direct_labels = inference.direct_labels;
        }

        switch (config.mode) {
            case PredictionMode::direct:
                return make_single_outcome(s.id, PredictionMode::direct, inference.direct_labels);
            case PredictionMode::conformal_single: {
                auto confidences = label_confidences_for(s, inference, config.safety_mode, backend,
                                                         templates,
                                                         trace ? &trace->score_prompt_hash : nullptr);
                if (trace) trace->confidences = confidences.entries();
                auto set = conformal::predict_set(confidences, config.calibration->q_hat);
                return make_single_outcome(s.id, PredictionMode::conformal_single, std::move(set));
            }
            case PredictionMode::conformal_multi: {
                auto set_confidences = set_confidences_for(
                    s, inference, config.safety_mode, backend, templates,
                    trace ? &trace->score_prompt_hash : nullptr);
                if (trace) {
                    trace->set_confidences.assign(set_confidences.begin(), set_confidences.end());
                }
                auto family = conformal::multilabel_predict(set_confidences,
                                                            config.calibration->q_hat);
                return make_multi_outcome(s.id, std::move(family));
            }
        }
        throw Error("unreachable prediction mode");
    } catch (const PlanError&) {
        throw;
    } catch (const Error& e) {
        throw PlanError(s.id, e.what());
    }
}

std::optional<OptionLabel> resolve_help(const PredictionOutcome& outcome, OptionLabel true_intent) {
    if (!outcome.asked_for_help) {
        throw PreconditionError("resolve_help: outcome did not ask for help");
    }
    auto offered = outcome.flattened();
    if (offered.count(true_intent)) return true_intent;
    return std::nullopt;
}

}  // namespace introplan::planner
