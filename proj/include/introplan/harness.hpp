#pragma once

#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "introplan/backends.hpp"
#include "introplan/cassette.hpp"
#include "introplan/conformal.hpp"
#include "introplan/domain.hpp"
#include "introplan/knowledge.hpp"
#include "introplan/metrics.hpp"
#include "introplan/openai_client.hpp"
#include "introplan/planner.hpp"
#include "introplan/synthetic.hpp"

namespace introplan::harness {

// A dataset is either a JSONL file or a synthetic generator spec.
struct DatasetSpec {
    std::string path;
    std::optional<std::size_t> synth_n;
    std::map<ScenarioKind, double> synth_mix;
    std::optional<std::uint64_t> synth_seed;

    bool is_synthetic() const { return synth_n.has_value(); }
    bool is_set() const { return is_synthetic() || !path.empty(); }
};

struct CassetteSpec {
    std::string mode = "off";  // off | record | replay
    std::string path;
};

struct BackendSpec {
    std::string kind = "synthetic";  // synthetic | openai
    OpenAiConfig openai;
    SyntheticModelParams synthetic;
    CassetteSpec cassette;
};

struct EmbeddingSpec {
    std::string kind = "synthetic";  // synthetic | openai
    std::size_t dim = 32;
    std::optional<std::uint64_t> seed;
};

// CLI-level overrides applied on top of the config file.
struct ConfigOverrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::string> backend_kind;
    bool offline = false;
};

struct RunConfig {
    BackendSpec backend;
    EmbeddingSpec embedding;
    std::string templates_dir = "templates";
    bool safety_mode = false;
    int fewshot_exemplars = -1;
    DatasetSpec train;
    DatasetSpec calibration;
    DatasetSpec test;
    std::string kb_path;
    std::string calibration_path;
    PredictionMode mode = PredictionMode::conformal_single;
    std::size_t m = 3;
    std::vector<double> target_success = {0.85};
    double delta = 0.01;
    bool delta_adjust = true;
    std::uint64_t seed = 1;
    std::size_t in_flight = 1;
    std::size_t skip_budget = 0;
    std::vector<std::size_t> kb_sizes;
    std::string output_dir = "out";

    static RunConfig from_json(const nlohmann::json& j);
    // Loads and validates: referenced input paths must exist, targets lie in
    // (0, 1). `overrides` fields replace the file's values when set.
    static RunConfig load(const std::string& path, const ConfigOverrides& overrides = {});
};

// Instantiated providers; `synthetic_text` is non-null when the text backend
// is (or wraps) the synthetic model, so datasets can be registered with it.
struct Backends {
    std::shared_ptr<TextBackend> text;
    std::shared_ptr<EmbeddingBackend> embedding;
    std::shared_ptr<SyntheticTextBackend> synthetic_text;
    std::shared_ptr<Cassette> cassette;
};

Backends make_backends(const RunConfig& config);

std::vector<Scenario> load_dataset(const DatasetSpec& spec, const RunConfig& config);

// Like load_dataset but per-line resilient: lines that fail to parse or
// validate become skip records instead of aborting. Used by the knowledge
// base build, which must survive isolated bad instances.
struct SkippedLine {
    std::size_t line = 0;
    std::string detail;
};
std::vector<Scenario> load_dataset_lenient(const DatasetSpec& spec, const RunConfig& config,
                                           std::vector<SkippedLine>* skipped);

// Makes outcome labels (candidate space) comparable with ground truth: the
// truth's flags are mapped onto the generated candidates by option text, and
// truth options the model failed to regenerate are appended so the valid-set
// size survives alignment.
Scenario align_truth_to_candidates(const Scenario& truth,
                                   const std::vector<PlanOption>& candidates);

struct BuildSummary {
    std::size_t attempted = 0;
    std::size_t built = 0;
    std::size_t skipped = 0;
    std::size_t warnings = 0;
    std::string kb_path;
    std::string report_path;
};

BuildSummary cmd_build_kb(const RunConfig& config, std::ostream& log);

conformal::CalibrationResult cmd_calibrate(const RunConfig& config, std::ostream& log);

struct EvaluateResult {
    metrics::MetricsReport report;
    std::vector<PredictionOutcome> outcomes;
    std::string run_log_path;
    std::string metrics_path;
};

EvaluateResult cmd_evaluate(const RunConfig& config, std::ostream& log);

struct SweepRow {
    std::string axis;      // "target" or "kb_size"
    double axis_value = 0; // target success, or knowledge-base size
    double epsilon_hat = 0;
    double q_hat = 0;
    metrics::MetricsReport report;
    double avg_set_size = 0;
};

std::vector<SweepRow> cmd_sweep(const RunConfig& config, std::ostream& log);

struct CoverageReport {
    int n = 0;
    double epsilon_hat = 0;
    int trials = 0;
    int tests_per_trial = 0;
    double delta = 0;
    std::uint64_t seed = 0;
    bool multilabel = false;
    double mean_coverage = 0;
    double analytic_mean = 0;       // ceil((n+1)(1-eps)) / (n+1), clamped to 1
    double empirical_delta_quantile = 0;
    double analytic_bound = 0;      // delta-quantile of Beta(n+1-l, l)
    double mean_tolerance = 0.01;
    double quantile_tolerance = 0.01;

    bool mean_ok() const;
    bool quantile_ok() const;
    bool passed() const { return mean_ok() && quantile_ok(); }
    nlohmann::json to_json() const;
};

// Monte Carlo check of the coverage guarantees: per trial, calibrate on n
// fresh exchangeable scores and measure empirical coverage on fresh tests.
// The multilabel flag runs the powerset variant over 3 labels.
CoverageReport verify_coverage(int n, double epsilon_hat, int trials, int tests_per_trial,
                               double delta, std::uint64_t seed, bool multilabel = false);

struct PlanCommandResult {
    PredictionOutcome outcome;
    bool needs_clarification = false;
};

PlanCommandResult cmd_plan(const RunConfig& config, const Scenario& scenario, bool interactive,
                           std::istream& in, std::ostream& out);

}  // namespace introplan::harness
