#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "introplan/backends.hpp"
#include "introplan/conformal.hpp"
#include "introplan/domain.hpp"

namespace introplan {

// Deterministic stand-in for an LLM. Confidences are Dirichlet draws whose
// concentration favours ground-truth-valid options, keyed by
// (seed, scene, task, option text) so identical prompts always score
// identically; across distinct scenarios the draws are i.i.d., which is
// exactly the exchangeability the conformal coverage tests need.
struct SyntheticModelParams {
    std::uint64_t seed = 1;
    double valid_concentration = 16.0;
    double invalid_concentration = 1.0;
    double escape_mass = 0.0;   // extra point mass mixed onto the escape option
    double noise_scale = 0.0;   // log-normal jitter on the per-option gamma draws

    void validate() const;  // throws PreconditionError
};

// Dirichlet-distributed confidences over the scenario's labels, deterministic
// in (params.seed, scene, task, option texts). Requires populated ground truth.
LabelConfidences synth_confidences(const Scenario& scenario, const SyntheticModelParams& params);

// Joint confidence per non-empty label subset, concentrated on the subset
// equal to the ground-truth valid set. Sums to 1 across the powerset.
conformal::SetConfidences synth_set_confidences(const Scenario& scenario,
                                                const SyntheticModelParams& params);

// Hash-to-sphere embedding: per-component standard normals drawn from the
// stream (seed, "embed|" + text), then L2-normalized. Same text, same vector.
EmbeddingVector synthetic_embedding(const std::string& text, std::uint64_t seed, std::size_t dim);

// Generates n ground-truth-labelled scenarios whose kind counts follow the
// mix up to largest-remainder rounding; intent labels of ambiguous kinds are
// sampled uniformly from the valid set. Instructions are unique within one
// generated dataset.
std::vector<Scenario> synth_dataset(std::size_t n, const std::map<ScenarioKind, double>& mix,
                                    std::uint64_t seed);

// TextBackend over a registry of known scenarios. Prompts are matched to a
// registered scenario by their final "Task:" line, so the same backend serves
// option generation, rationale generation, inference, next-token scoring and
// powerset queries with mutually consistent, seeded answers.
class SyntheticTextBackend : public TextBackend {
public:
    explicit SyntheticTextBackend(SyntheticModelParams params);

    void register_scenario(const Scenario& scenario);
    void register_scenarios(const std::vector<Scenario>& scenarios);

    CompletionResponse complete(const CompletionRequest& request) override;
    std::string id() const override;

    const SyntheticModelParams& params() const { return params_; }

private:
    const Scenario& lookup(const std::string& scene, const std::string& task) const;

    SyntheticModelParams params_;
    std::map<std::string, Scenario> by_key_;  // scene + '\x1f' + task
};

class SyntheticEmbeddingBackend : public EmbeddingBackend {
public:
    SyntheticEmbeddingBackend(std::uint64_t seed, std::size_t dim) : seed_(seed), dim_(dim) {}

    EmbeddingVector embed(const std::string& text) override;
    std::size_t dim() const override { return dim_; }
    std::string id() const override;

private:
    std::uint64_t seed_;
    std::size_t dim_;
};

}  // namespace introplan
