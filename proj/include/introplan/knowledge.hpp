#pragma once

#include <optional>
#include <string>
#include <vector>

#include "introplan/backends.hpp"
#include "introplan/confidence.hpp"
#include "introplan/domain.hpp"
#include "introplan/prompting.hpp"

namespace introplan::knowledge {

// One introspective exemplar: the training scenario, the candidates generated
// for it, the post-hoc rationale conditioned on the ground-truth valid set,
// and the instruction embedding used as the retrieval key.
struct KnowledgeEntry {
    EmbeddingVector key;
    Scenario scenario;
    std::vector<PlanOption> candidates;
    std::string rationale;
    LabelSet valid_labels;  // over candidate labels

    // Empty list when all entry invariants hold.
    std::vector<std::string> validate(std::size_t expected_dim) const;
};

struct Provenance {
    std::string text_backend;
    std::string embed_backend;
    std::string template_version;
    std::string built_at;  // ISO-8601; informational only
};

struct KnowledgeBase {
    std::vector<KnowledgeEntry> entries;
    std::size_t embedding_dim = 0;
    Provenance provenance;

    bool empty() const { return entries.empty(); }
    std::size_t size() const { return entries.size(); }
};

struct BuildIssue {
    enum class Kind { skipped, coverage_warning };
    Kind kind = Kind::skipped;
    std::string scenario_id;
    std::string detail;
};

struct BuildReport {
    std::size_t attempted = 0;
    std::size_t built = 0;
    std::vector<BuildIssue> issues;

    std::size_t skip_count() const;
    std::size_t warning_count() const;
};

struct BuildOptions {
    bool safety_mode = false;
    int exemplar_limit = -1;  // few-shot blocks in generation prompts
    std::size_t in_flight = 1;
};

// Parses the backend's lettered list for one scenario, guaranteeing exactly
// one escape option (appended with the next free letter when the model omits
// it). Retries the completion once before throwing GenerationFormatError.
std::vector<PlanOption> generate_choices(const Scenario& s, TextBackend& backend,
                                         const prompting::TemplateSet& templates,
                                         const prompting::RenderOptions& opts = {});

// Post-hoc rationalization: asks the model why `valid_labels` are the correct
// candidates. Retries once on empty output.
std::string generate_rationale(const Scenario& s, const std::vector<PlanOption>& candidates,
                               const LabelSet& valid_labels, TextBackend& backend,
                               const prompting::TemplateSet& templates,
                               const prompting::RenderOptions& opts = {});

// Builds one entry per training scenario: candidates, rationale, then the
// instruction embedding as key. Per-instance failures are recorded in the
// report and skipped; an entirely failed non-empty build throws
// EmptyBuildError. Entries keep training input order.
KnowledgeBase build_knowledge_base(const std::vector<Scenario>& train, TextBackend& backend,
                                   EmbeddingBackend& embed_backend,
                                   const prompting::TemplateSet& templates,
                                   const BuildOptions& options = {},
                                   BuildReport* report = nullptr);

struct RetrievalHit {
    const KnowledgeEntry* entry = nullptr;
    double similarity = 0.0;
};

// Top-m entries by cosine similarity between the embedded query and the
// entry keys, descending; ties keep insertion order. Returns min(m, |kb|).
std::vector<RetrievalHit> retrieve_similar(const std::string& query, const KnowledgeBase& kb,
                                           std::size_t m, EmbeddingBackend& embed_backend);

prompting::ExemplarBlock to_exemplar(const KnowledgeEntry& entry);

// Line-delimited persistence: a header line with schema version, embedding
// dimension, and provenance, then one entry per line. Loading revalidates
// every invariant and reports corrupt lines by number.
void save_kb(const KnowledgeBase& kb, const std::string& path);
KnowledgeBase load_kb(const std::string& path);

}  // namespace introplan::knowledge
