#pragma once

#include <map>
#include <string>
#include <vector>

#include "introplan/domain.hpp"

namespace introplan::prompting {

enum class TemplateName { option_gen, knowledge_gen, inference, next_token, multilabel_query };

std::string to_string(TemplateName name);

// One template file, split into its preamble, verbatim few-shot exemplar
// blocks, and placeholder-bearing blocks. The safety sentence is injected at
// the end of the preamble when rendering in safety mode.
class PromptTemplate {
public:
    static PromptTemplate parse(TemplateName name, const std::string& file_text);

    TemplateName name() const { return name_; }
    int exemplar_slots() const { return static_cast<int>(exemplars_.size()); }
    const std::string& preamble() const { return preamble_; }

    // Substitutes `vars` into the placeholder blocks, keeps at most
    // `exemplar_limit` few-shot blocks (negative = all), and appends the
    // safety sentence to the preamble when `safety_mode` is set. Throws on
    // placeholders without a binding.
    std::string render(const std::map<std::string, std::string>& vars, bool safety_mode,
                       const std::string& safety_sentence, int exemplar_limit = -1) const;

private:
    enum class BlockKind { preamble, exemplar, placeholder };

    TemplateName name_ = TemplateName::option_gen;
    std::string preamble_;
    bool has_safety_slot_ = false;
    std::vector<std::string> exemplars_;
    std::vector<std::pair<BlockKind, std::string>> blocks_;
};

// The five prompt templates plus the safety sentence, loaded from versioned
// files. `version()` hashes all file bytes; calibration artifacts pin it so a
// quantile is never reused across template edits.
class TemplateSet {
public:
    static TemplateSet load(const std::string& dir);

    const PromptTemplate& get(TemplateName name) const;
    const std::string& safety_sentence() const { return safety_sentence_; }
    const std::string& version() const { return version_; }

private:
    std::map<TemplateName, PromptTemplate> templates_;
    std::string safety_sentence_;
    std::string version_;
};

struct RenderOptions {
    bool safety_mode = false;
    int exemplar_limit = -1;  // few-shot blocks to keep; negative = all
};

// A fully answered Scene/Task/Options/Explain/Prediction block, the unit the
// inference prompt is assembled from.
struct ExemplarBlock {
    std::string scene;
    std::string task;
    std::vector<PlanOption> options;
    std::string rationale;
    LabelSet prediction;
};

std::string options_block(const std::vector<PlanOption>& options);  // "A) ...\nB) ..."
std::string letters_string(const LabelSet& labels);                 // "B, C"
std::string render_exemplar_block(const ExemplarBlock& exemplar);

std::string render_option_gen_prompt(const Scenario& s, const TemplateSet& templates,
                                     const RenderOptions& opts = {});
std::string render_knowledge_gen_prompt(const Scenario& s, const std::vector<PlanOption>& candidates,
                                        const LabelSet& valid_labels, const TemplateSet& templates,
                                        const RenderOptions& opts = {});
std::string render_inference_prompt(const Scenario& s, const std::vector<ExemplarBlock>& exemplars,
                                    const TemplateSet& templates, const RenderOptions& opts = {});
std::string render_next_token_prompt(const Scenario& s, const std::vector<PlanOption>& options,
                                     const std::string& rationale, const TemplateSet& templates,
                                     const RenderOptions& opts = {});
std::string render_multilabel_query(const LabelSet& subset, const Scenario& s,
                                    const std::vector<PlanOption>& options,
                                    const std::string& rationale, const TemplateSet& templates,
                                    const RenderOptions& opts = {});

struct InferenceOutput {
    std::vector<PlanOption> options;
    std::string rationale;
    LabelSet direct_labels;
};

// Extracts the lettered options, the Explain paragraph, and the prediction
// letters from a model completion (or a fully answered exemplar block).
// Accepts both "Prediction:" and "Correct Action(s):" answer markers. Throws
// ParseError (carrying the raw text) when any part is missing.
InferenceOutput parse_inference_output(const std::string& text);

// Collects "X) ..." lines in order, canonicalizes the escape sentence, drops
// duplicate escape lines, and relabels the result A.. in parse order. Returns
// an empty vector when no option lines are present.
std::vector<PlanOption> parse_option_lines(const std::string& text);

}  // namespace introplan::prompting
