#include "introplan/harness.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>

#include "introplan/errors.hpp"
#include "introplan/parallel.hpp"
#include "introplan/rng.hpp"

namespace introplan::harness {

namespace fs = std::filesystem;

namespace {

std::string normalized(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    auto b = out.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    auto e = out.find_last_not_of(" \t\r\n");
    return out.substr(b, e - b + 1);
}

void ensure_parent_dir(const std::string& path) {
    auto parent = fs::path(path).parent_path();
    if (!parent.empty()) fs::create_directories(parent);
}

std::ofstream open_output(const std::string& path) {
    ensure_parent_dir(path);
    std::ofstream out(path);
    if (!out) throw SchemaError("cannot write '" + path + "'");
    return out;
}

std::string format_rate(const metrics::Rate& r) {
    auto v = r.value();
    if (!v) return "n/a";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", *v);
    return buf;
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

namespace {

DatasetSpec dataset_from_json(const nlohmann::json& j) {
    DatasetSpec spec;
    if (j.contains("path")) spec.path = j.at("path").get<std::string>();
    if (j.contains("synthetic")) {
        const auto& s = j.at("synthetic");
        spec.synth_n = s.at("n").get<std::size_t>();
        if (s.contains("seed")) spec.synth_seed = s.at("seed").get<std::uint64_t>();
        if (s.contains("mix")) {
            for (auto it = s.at("mix").begin(); it != s.at("mix").end(); ++it) {
                spec.synth_mix[scenario_kind_from_string(it.key())] = it.value().get<double>();
            }
        }
    }
    return spec;
}

SyntheticModelParams synthetic_params_from_json(const nlohmann::json& j) {
    SyntheticModelParams p;
    if (j.contains("seed")) p.seed = j.at("seed").get<std::uint64_t>();
    p.valid_concentration = j.value("valid_concentration", p.valid_concentration);
    p.invalid_concentration = j.value("invalid_concentration", p.invalid_concentration);
    p.escape_mass = j.value("escape_mass", p.escape_mass);
    p.noise_scale = j.value("noise_scale", p.noise_scale);
    return p;
}

OpenAiConfig openai_from_json(const nlohmann::json& j) {
    OpenAiConfig c;
    c.base_url = j.value("base_url", c.base_url);
    c.model = j.value("model", c.model);
    c.api = j.value("api", c.api);
    c.embedding_model = j.value("embedding_model", c.embedding_model);
    c.embedding_dim = j.value("embedding_dim", c.embedding_dim);
    c.api_key_env = j.value("api_key_env", c.api_key_env);
    c.max_retries = j.value("max_retries", c.max_retries);
    c.retry_backoff_ms = j.value("retry_backoff_ms", c.retry_backoff_ms);
    c.timeout_ms = j.value("timeout_ms", c.timeout_ms);
    return c;
}

}  // namespace

RunConfig RunConfig::from_json(const nlohmann::json& j) {
    RunConfig c;
    if (j.contains("backend")) {
        const auto& b = j.at("backend");
        c.backend.kind = b.value("kind", c.backend.kind);
        bool synthetic_seed_given = false;
        if (b.contains("synthetic")) {
            c.backend.synthetic = synthetic_params_from_json(b.at("synthetic"));
            synthetic_seed_given = b.at("synthetic").contains("seed");
        }
        if (!synthetic_seed_given) c.backend.synthetic.seed = 0;  // resolved against run seed below
        if (b.contains("openai")) c.backend.openai = openai_from_json(b.at("openai"));
        if (b.contains("cassette")) {
            c.backend.cassette.mode = b.at("cassette").value("mode", "off");
            c.backend.cassette.path = b.at("cassette").value("path", "");
        }
    } else {
        c.backend.synthetic.seed = 0;
    }
    if (j.contains("embedding")) {
        const auto& e = j.at("embedding");
        c.embedding.kind = e.value("kind", c.embedding.kind);
        c.embedding.dim = e.value("dim", c.embedding.dim);
        if (e.contains("seed")) c.embedding.seed = e.at("seed").get<std::uint64_t>();
    }
    c.templates_dir = j.value("templates_dir", c.templates_dir);
    c.safety_mode = j.value("safety_mode", c.safety_mode);
    c.fewshot_exemplars = j.value("fewshot_exemplars", c.fewshot_exemplars);
    if (j.contains("datasets")) {
        const auto& d = j.at("datasets");
        if (d.contains("train")) c.train = dataset_from_json(d.at("train"));
        if (d.contains("calibration")) c.calibration = dataset_from_json(d.at("calibration"));
        if (d.contains("test")) c.test = dataset_from_json(d.at("test"));
    }
    c.kb_path = j.value("kb_path", c.kb_path);
    c.calibration_path = j.value("calibration_path", c.calibration_path);
    if (j.contains("mode")) c.mode = prediction_mode_from_string(j.at("mode").get<std::string>());
    c.m = j.value("m", c.m);
    if (j.contains("target_success")) {
        c.target_success = j.at("target_success").get<std::vector<double>>();
    }
    c.delta = j.value("delta", c.delta);
    c.delta_adjust = j.value("delta_adjust", c.delta_adjust);
    c.seed = j.value("seed", c.seed);
    c.in_flight = j.value("in_flight", c.in_flight);
    c.skip_budget = j.value("skip_budget", c.skip_budget);
    if (j.contains("kb_sizes")) c.kb_sizes = j.at("kb_sizes").get<std::vector<std::size_t>>();
    c.output_dir = j.value("output_dir", c.output_dir);
    return c;
}

RunConfig RunConfig::load(const std::string& path, const ConfigOverrides& overrides) {
    std::ifstream in(path);
    if (!in) throw SchemaError("cannot open config '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError("config '" + path + "': " + e.what());
    }
    RunConfig c = from_json(j);

    if (overrides.seed) c.seed = *overrides.seed;
    if (overrides.backend_kind) c.backend.kind = *overrides.backend_kind;
    if (overrides.offline && c.backend.kind == "openai" && c.backend.cassette.mode != "replay") {
        throw PreconditionError(
            "--offline requires the synthetic backend or a cassette in replay mode");
    }

    // Component seeds default to the run seed.
    if (c.backend.synthetic.seed == 0) c.backend.synthetic.seed = c.seed;
    if (!c.embedding.seed) c.embedding.seed = c.seed;
    if (c.kb_path.empty()) c.kb_path = c.output_dir + "/kb.jsonl";
    if (c.calibration_path.empty()) c.calibration_path = c.output_dir + "/calibration.json";

    if (c.backend.kind != "synthetic" && c.backend.kind != "openai") {
        throw PreconditionError("backend.kind must be 'synthetic' or 'openai'");
    }
    if (!(c.delta > 0.0 && c.delta < 1.0)) {
        throw PreconditionError("delta must lie in (0, 1)");
    }
    if (c.target_success.empty()) throw PreconditionError("target_success must not be empty");
    for (double t : c.target_success) {
        if (!(t > 0.0 && t < 1.0)) {
            throw PreconditionError("target_success values must lie in (0, 1)");
        }
    }
    if (!fs::exists(c.templates_dir)) {
        throw PreconditionError("templates_dir '" + c.templates_dir + "' does not exist");
    }
    for (const DatasetSpec* spec : {&c.train, &c.calibration, &c.test}) {
        if (!spec->path.empty() && !fs::exists(spec->path)) {
            throw PreconditionError("dataset file '" + spec->path + "' does not exist");
        }
    }
    return c;
}

Backends make_backends(const RunConfig& config) {
    Backends b;
    if (config.backend.kind == "synthetic") {
        b.synthetic_text = std::make_shared<SyntheticTextBackend>(config.backend.synthetic);
        b.text = b.synthetic_text;
    } else {
        auto openai = std::make_shared<OpenAiTextBackend>(config.backend.openai);
        if (config.backend.cassette.mode == "record") {
            b.cassette = std::make_shared<Cassette>(config.backend.cassette.path,
                                                    Cassette::Mode::record);
            b.text = std::make_shared<CassetteTextBackend>(b.cassette, openai);
        } else if (config.backend.cassette.mode == "replay") {
            b.cassette = std::make_shared<Cassette>(config.backend.cassette.path,
                                                    Cassette::Mode::replay);
            b.text = std::make_shared<CassetteTextBackend>(b.cassette, nullptr);
        } else {
            b.text = openai;
        }
    }
    if (config.embedding.kind == "synthetic") {
        b.embedding = std::make_shared<SyntheticEmbeddingBackend>(*config.embedding.seed,
                                                                  config.embedding.dim);
    } else {
        auto openai_embed = std::make_shared<OpenAiEmbeddingBackend>(config.backend.openai);
        if (b.cassette) {
            b.embedding = std::make_shared<CassetteEmbeddingBackend>(
                b.cassette,
                config.backend.cassette.mode == "replay" ? nullptr : openai_embed,
                config.backend.openai.embedding_dim);
        } else {
            b.embedding = openai_embed;
        }
    }
    return b;
}

std::vector<Scenario> load_dataset(const DatasetSpec& spec, const RunConfig& config) {
    if (spec.is_synthetic()) {
        auto mix = spec.synth_mix;
        if (mix.empty()) {
            mix = {{ScenarioKind::unambiguous, 0.25},     {ScenarioKind::single_label, 0.15},
                   {ScenarioKind::multi_label, 0.15},     {ScenarioKind::spatially_ambiguous, 0.10},
                   {ScenarioKind::unsafe, 0.10},          {ScenarioKind::winograd, 0.05},
                   {ScenarioKind::creative, 0.05},        {ScenarioKind::unsafe_ambiguous, 0.10},
                   {ScenarioKind::serious_unsafe, 0.05}};
        }
        return synth_dataset(*spec.synth_n, mix, spec.synth_seed.value_or(config.seed));
    }
    if (spec.path.empty()) throw PreconditionError("dataset spec has neither path nor synthetic");
    return load_scenarios_jsonl(spec.path);
}

std::vector<Scenario> load_dataset_lenient(const DatasetSpec& spec, const RunConfig& config,
                                           std::vector<SkippedLine>* skipped) {
    if (spec.is_synthetic() || spec.path.empty()) return load_dataset(spec, config);
    std::ifstream in(spec.path);
    if (!in) throw SchemaError("cannot open dataset file '" + spec.path + "'");
    std::vector<Scenario> scenarios;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            auto s = scenario_from_json(nlohmann::json::parse(line));
            auto violations = validate_scenario(s);
            if (!violations.empty()) throw SchemaError(violations.front());
            scenarios.push_back(std::move(s));
        } catch (const std::exception& e) {
            if (skipped) skipped->push_back({line_no, e.what()});
        }
    }
    return scenarios;
}

Scenario align_truth_to_candidates(const Scenario& truth,
                                   const std::vector<PlanOption>& candidates) {
    Scenario aligned;
    aligned.id = truth.id;
    aligned.scene = truth.scene;
    aligned.instruction = truth.instruction;
    aligned.observation = truth.observation;
    aligned.kind = truth.kind;

    std::vector<bool> truth_used(truth.options.size(), false);
    for (const auto& c : candidates) {
        PlanOption o = c;
        o.is_valid = o.is_unsafe = o.is_intent = false;
        for (std::size_t i = 0; i < truth.options.size(); ++i) {
            if (truth_used[i]) continue;
            if (normalized(truth.options[i].text) == normalized(c.text)) {
                o.is_valid = truth.options[i].is_valid;
                o.is_unsafe = truth.options[i].is_unsafe;
                o.is_intent = truth.options[i].is_intent;
                truth_used[i] = true;
                break;
            }
        }
        aligned.options.push_back(std::move(o));
    }
    // Ground-truth options the model failed to regenerate keep their flags
    // under fresh letters; they can never enter a prediction set, but they
    // preserve the valid-set size for the ambiguity-sensitive metrics.
    for (std::size_t i = 0; i < truth.options.size(); ++i) {
        if (truth_used[i]) continue;
        const auto& t = truth.options[i];
        if (!t.is_valid && !t.is_unsafe && !t.is_intent) continue;
        PlanOption o = t;
        o.label = OptionLabel::from_index(aligned.options.size());
        aligned.options.push_back(std::move(o));
    }
    return aligned;
}

// ---------------------------------------------------------------------------
// build-kb
// ---------------------------------------------------------------------------

BuildSummary cmd_build_kb(const RunConfig& config, std::ostream& log) {
    std::vector<SkippedLine> bad_lines;
    auto train = load_dataset_lenient(config.train, config, &bad_lines);
    if (train.empty()) log << "warning: training set is empty; writing an empty knowledge base\n";
    auto backends = make_backends(config);
    if (backends.synthetic_text) backends.synthetic_text->register_scenarios(train);

    knowledge::BuildOptions options;
    options.safety_mode = config.safety_mode;
    options.exemplar_limit = config.fewshot_exemplars;
    options.in_flight = config.in_flight;

    knowledge::BuildReport report;
    auto kb = knowledge::build_knowledge_base(train, *backends.text, *backends.embedding,
                                              prompting::TemplateSet::load(config.templates_dir),
                                              options, &report);
    ensure_parent_dir(config.kb_path);
    knowledge::save_kb(kb, config.kb_path);

    nlohmann::json issues = nlohmann::json::array();
    for (const auto& bad : bad_lines) {
        issues.push_back({{"kind", "skipped"},
                          {"scenario_id", "line " + std::to_string(bad.line)},
                          {"detail", bad.detail}});
    }
    for (const auto& issue : report.issues) {
        issues.push_back({{"kind", issue.kind == knowledge::BuildIssue::Kind::skipped
                                       ? "skipped"
                                       : "coverage_warning"},
                          {"scenario_id", issue.scenario_id},
                          {"detail", issue.detail}});
    }
    nlohmann::json report_json{{"attempted", report.attempted + bad_lines.size()},
                               {"built", report.built},
                               {"skipped", report.skip_count() + bad_lines.size()},
                               {"coverage_warnings", report.warning_count()},
                               {"kb_path", config.kb_path},
                               {"issues", std::move(issues)}};
    BuildSummary summary;
    summary.attempted = report.attempted + bad_lines.size();
    summary.built = report.built;
    summary.skipped = report.skip_count() + bad_lines.size();
    summary.warnings = report.warning_count();
    summary.kb_path = config.kb_path;
    summary.report_path = config.output_dir + "/build_report.json";
    open_output(summary.report_path) << report_json.dump(2) << "\n";

    log << "knowledge base: built " << summary.built << "/" << summary.attempted << " entries ("
        << summary.skipped << " skipped, " << summary.warnings << " coverage warnings) -> "
        << config.kb_path << "\n";
    return summary;
}

// ---------------------------------------------------------------------------
// Shared scoring pipeline
// ---------------------------------------------------------------------------

namespace {

struct Scored {
    const Scenario* truth = nullptr;
    planner::InferenceResult inference;
    std::optional<LabelConfidences> confidences;     // conformal_single
    conformal::SetConfidences set_confidences;       // conformal_multi
    std::string score_prompt_hash;
};

Scored score_one(const Scenario& s, const knowledge::KnowledgeBase& kb, PredictionMode mode,
                 Backends& backends, const prompting::TemplateSet& templates,
                 const RunConfig& config) {
    Scored scored;
    scored.truth = &s;
    scored.inference = planner::run_inference(s, kb, config.m, config.safety_mode, *backends.text,
                                              *backends.embedding, templates);
    if (mode == PredictionMode::conformal_single) {
        scored.confidences = planner::label_confidences_for(s, scored.inference, config.safety_mode,
                                                            *backends.text, templates,
                                                            &scored.score_prompt_hash);
    } else if (mode == PredictionMode::conformal_multi) {
        scored.set_confidences = planner::set_confidences_for(s, scored.inference,
                                                              config.safety_mode, *backends.text,
                                                              templates, &scored.score_prompt_hash);
    }
    return scored;
}

// Maps the truth's intent (single) or valid set (multi) into candidate-label
// space by option text; nullopt when the pipeline failed to regenerate it.
std::optional<OptionLabel> intent_in_candidates(const Scenario& truth,
                                                const std::vector<PlanOption>& candidates) {
    auto intent = truth.intent_label();
    if (!intent) return std::nullopt;
    const auto* option = truth.find_option(*intent);
    for (const auto& c : candidates) {
        if (normalized(c.text) == normalized(option->text)) return c.label;
    }
    return std::nullopt;
}

std::optional<LabelSet> valid_in_candidates(const Scenario& truth,
                                            const std::vector<PlanOption>& candidates) {
    LabelSet mapped;
    for (const auto& t : truth.options) {
        if (!t.is_valid) continue;
        bool found = false;
        for (const auto& c : candidates) {
            if (normalized(c.text) == normalized(t.text)) {
                mapped.insert(c.label);
                found = true;
                break;
            }
        }
        if (!found) return std::nullopt;
    }
    if (mapped.empty()) return std::nullopt;
    return mapped;
}

// Nonconformity of the ground truth under the scored pipeline; nullopt when
// the truth could not be mapped onto the generated candidates.
std::optional<double> truth_score(const Scored& scored, PredictionMode mode) {
    if (mode == PredictionMode::conformal_multi) {
        auto valid = valid_in_candidates(*scored.truth, scored.inference.options);
        if (!valid) return std::nullopt;
        auto it = scored.set_confidences.find(*valid);
        if (it == scored.set_confidences.end()) return std::nullopt;
        return 1.0 - it->second;
    }
    auto intent = intent_in_candidates(*scored.truth, scored.inference.options);
    if (!intent || !scored.confidences) return std::nullopt;
    return conformal::nonconformity(*scored.confidences, *intent);
}

std::vector<Scored> score_all(const std::vector<Scenario>& scenarios,
                              const knowledge::KnowledgeBase& kb, PredictionMode mode,
                              Backends& backends, const prompting::TemplateSet& templates,
                              const RunConfig& config) {
    return parallel_map(
        scenarios,
        [&](const Scenario& s, std::size_t) {
            return score_one(s, kb, mode, backends, templates, config);
        },
        config.in_flight);
}

PredictionOutcome outcome_from_scored(const Scored& scored, PredictionMode mode, double q_hat) {
    if (mode == PredictionMode::direct) {
        return make_single_outcome(scored.truth->id, mode, scored.inference.direct_labels);
    }
    if (mode == PredictionMode::conformal_single) {
        return make_single_outcome(scored.truth->id, mode,
                                   conformal::predict_set(*scored.confidences, q_hat));
    }
    return make_multi_outcome(scored.truth->id,
                              conformal::multilabel_predict(scored.set_confidences, q_hat));
}

nlohmann::json run_log_record(const Scored& scored, const PredictionOutcome& outcome) {
    nlohmann::json options = nlohmann::json::array();
    for (const auto& o : scored.inference.options) {
        options.push_back({{"label", o.label.str()}, {"text", o.text}});
    }
    nlohmann::json direct = nlohmann::json::array();
    for (const auto& l : scored.inference.direct_labels) direct.push_back(l.str());
    nlohmann::json record{{"scenario_id", outcome.scenario_id},
                          {"mode", to_string(outcome.mode)},
                          {"retrieved", scored.inference.retrieved_ids},
                          {"similarities", scored.inference.retrieved_similarities},
                          {"prompt_hashes",
                           {{"inference", scored.inference.inference_prompt_hash},
                            {"score", scored.score_prompt_hash}}},
                          {"options", std::move(options)},
                          {"rationale", scored.inference.rationale},
                          {"direct_labels", std::move(direct)}};
    if (scored.confidences) {
        nlohmann::json confidences;
        for (const auto& [label, value] : scored.confidences->entries()) {
            confidences[label.str()] = value;
        }
        record["confidences"] = std::move(confidences);
    }
    if (!scored.set_confidences.empty()) {
        nlohmann::json sets = nlohmann::json::array();
        for (const auto& [subset, value] : scored.set_confidences) {
            nlohmann::json letters = nlohmann::json::array();
            for (const auto& l : subset) letters.push_back(l.str());
            sets.push_back({{"subset", std::move(letters)}, {"confidence", value}});
        }
        record["set_confidences"] = std::move(sets);
    }
    auto outcome_json = to_json(outcome);
    record["prediction_set"] = outcome_json.at("prediction_set");
    if (outcome_json.contains("family")) record["family"] = outcome_json.at("family");
    record["certain"] = outcome.certain;
    record["asked_for_help"] = outcome.asked_for_help;
    return record;
}

std::vector<double> calibration_scores(const std::vector<Scored>& scored, PredictionMode mode,
                                       std::size_t skip_budget, std::ostream& log) {
    std::vector<double> scores;
    std::size_t skipped = 0;
    for (const auto& s : scored) {
        if (!s.truth->has_ground_truth() || !s.truth->intent_label()) {
            throw PreconditionError("calibration scenario '" + s.truth->id +
                                    "' lacks ground truth or intent");
        }
        auto value = truth_score(s, mode);
        if (!value) {
            ++skipped;
            log << "calibrate: skipping '" << s.truth->id
                << "' (ground truth not covered by generated candidates)\n";
            continue;
        }
        scores.push_back(*value);
    }
    if (skipped > skip_budget) {
        throw Error("calibrate: " + std::to_string(skipped) +
                    " instances failed, exceeding the skip budget of " +
                    std::to_string(skip_budget));
    }
    return scores;
}

PredictionMode artifact_mode(PredictionMode run_mode) {
    return run_mode == PredictionMode::conformal_multi ? PredictionMode::conformal_multi
                                                       : PredictionMode::conformal_single;
}

}  // namespace

// ---------------------------------------------------------------------------
// calibrate
// ---------------------------------------------------------------------------

conformal::CalibrationResult cmd_calibrate(const RunConfig& config, std::ostream& log) {
    auto kb = knowledge::load_kb(config.kb_path);
    auto calibration_set = load_dataset(config.calibration, config);
    if (calibration_set.empty()) {
        throw PreconditionError("calibrate: calibration dataset is empty");
    }
    auto templates = prompting::TemplateSet::load(config.templates_dir);
    auto backends = make_backends(config);
    if (backends.synthetic_text) backends.synthetic_text->register_scenarios(calibration_set);

    const auto mode = artifact_mode(config.mode);
    auto scored = score_all(calibration_set, kb, mode, backends, templates, config);
    auto scores = calibration_scores(scored, mode, config.skip_budget, log);
    if (scores.empty()) throw PreconditionError("calibrate: no usable calibration scores");

    auto result = conformal::calibrate_for_target(
        std::move(scores), config.target_success.front(),
        config.delta_adjust ? std::optional<double>(config.delta) : std::nullopt, mode,
        templates.version(), backends.text->id());
    ensure_parent_dir(config.calibration_path);
    result.save(config.calibration_path);
    log << "calibration: n=" << result.n << " target=" << config.target_success.front()
        << " epsilon_hat=" << result.epsilon_hat << " q_hat=" << result.q_hat << " -> "
        << config.calibration_path << "\n";
    return result;
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

namespace {

conformal::CalibrationResult load_artifact_checked(const RunConfig& config,
                                                   const prompting::TemplateSet& templates) {
    auto artifact = conformal::CalibrationResult::load(config.calibration_path);
    if (artifact.template_version != templates.version()) {
        throw VersionMismatchError("calibration artifact was produced with template version " +
                                   artifact.template_version + " but the live templates are " +
                                   templates.version());
    }
    return artifact;
}

}  // namespace

EvaluateResult cmd_evaluate(const RunConfig& config, std::ostream& log) {
    auto kb = knowledge::load_kb(config.kb_path);
    auto test_set = load_dataset(config.test, config);
    if (test_set.empty()) throw PreconditionError("evaluate: test dataset is empty");
    auto templates = prompting::TemplateSet::load(config.templates_dir);
    auto backends = make_backends(config);
    if (backends.synthetic_text) backends.synthetic_text->register_scenarios(test_set);

    std::optional<conformal::CalibrationResult> artifact;
    double q_hat = 0.0;
    if (config.mode != PredictionMode::direct) {
        artifact = load_artifact_checked(config, templates);
        q_hat = artifact->q_hat;
    }

    auto scored = score_all(test_set, kb, config.mode, backends, templates, config);

    EvaluateResult result;
    result.run_log_path = config.output_dir + "/run_log.jsonl";
    auto run_log = open_output(result.run_log_path);
    std::vector<Scenario> aligned;
    aligned.reserve(scored.size());
    for (const auto& s : scored) {
        auto outcome = outcome_from_scored(s, config.mode, q_hat);
        run_log << run_log_record(s, outcome).dump() << "\n";
        aligned.push_back(align_truth_to_candidates(*s.truth, s.inference.options));
        result.outcomes.push_back(std::move(outcome));
    }
    result.report = metrics::compute_metrics(result.outcomes, aligned);

    result.metrics_path = config.output_dir + "/metrics.tsv";
    open_output(result.metrics_path) << result.report.to_table();
    open_output(config.output_dir + "/metrics.json") << result.report.to_json().dump(2) << "\n";

    auto classifications = open_output(config.output_dir + "/classifications.jsonl");
    for (std::size_t i = 0; i < result.outcomes.size(); ++i) {
        nlohmann::json tags = nlohmann::json::array();
        for (auto tag : metrics::classify_errors(result.outcomes[i], aligned[i])) {
            tags.push_back(metrics::to_string(tag));
        }
        classifications << nlohmann::json{{"scenario_id", result.outcomes[i].scenario_id},
                                          {"errors", std::move(tags)}}
                               .dump()
                        << "\n";
    }

    log << "evaluate: n=" << result.report.n << " sr=" << format_rate(result.report.sr)
        << " hr=" << format_rate(result.report.hr) << " esr=" << format_rate(result.report.esr)
        << " -> " << result.metrics_path << "\n";
    return result;
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

namespace {

SweepRow sweep_row(const std::string& axis, double axis_value, double epsilon_hat, double q_hat,
                   const std::vector<Scored>& scored, PredictionMode mode) {
    std::vector<PredictionOutcome> outcomes;
    std::vector<Scenario> aligned;
    double total_set_size = 0.0;
    for (const auto& s : scored) {
        auto outcome = outcome_from_scored(s, mode, q_hat);
        total_set_size += static_cast<double>(outcome.flattened().size());
        aligned.push_back(align_truth_to_candidates(*s.truth, s.inference.options));
        outcomes.push_back(std::move(outcome));
    }
    SweepRow row;
    row.axis = axis;
    row.axis_value = axis_value;
    row.epsilon_hat = epsilon_hat;
    row.q_hat = q_hat;
    row.report = metrics::compute_metrics(outcomes, aligned);
    row.avg_set_size = scored.empty() ? 0.0 : total_set_size / static_cast<double>(scored.size());
    return row;
}

void write_sweep_table(const std::vector<SweepRow>& rows, const std::string& path) {
    std::string out = "axis\tvalue\tepsilon_hat\tq_hat\tsr\thr\tesr\tncr\tucr\toar\tosr\tur\tavg_set_size\n";
    for (const auto& r : rows) {
        out += r.axis + "\t" + format_double(r.axis_value) + "\t" + format_double(r.epsilon_hat) +
               "\t" + format_double(r.q_hat) + "\t" + format_rate(r.report.sr) + "\t" +
               format_rate(r.report.hr) + "\t" + format_rate(r.report.esr) + "\t" +
               format_rate(r.report.ncr) + "\t" + format_rate(r.report.ucr) + "\t" +
               format_rate(r.report.oar) + "\t" + format_rate(r.report.osr) + "\t" +
               format_rate(r.report.ur) + "\t" + format_double(r.avg_set_size) + "\n";
    }
    std::ofstream file;
    ensure_parent_dir(path);
    file.open(path);
    if (!file) throw SchemaError("cannot write '" + path + "'");
    file << out;
}

}  // namespace

std::vector<SweepRow> cmd_sweep(const RunConfig& config, std::ostream& log) {
    if (config.mode == PredictionMode::direct) {
        throw PreconditionError("sweep: requires a conformal mode");
    }
    const bool kb_axis = !config.kb_sizes.empty();
    if (!kb_axis && config.target_success.size() < 2) {
        throw PreconditionError("sweep: need at least 2 target_success points");
    }

    auto kb = knowledge::load_kb(config.kb_path);
    auto calibration_set = load_dataset(config.calibration, config);
    auto test_set = load_dataset(config.test, config);
    if (calibration_set.empty() || test_set.empty()) {
        throw PreconditionError("sweep: calibration and test datasets must be non-empty");
    }
    auto templates = prompting::TemplateSet::load(config.templates_dir);
    auto backends = make_backends(config);
    if (backends.synthetic_text) {
        backends.synthetic_text->register_scenarios(calibration_set);
        backends.synthetic_text->register_scenarios(test_set);
    }

    std::vector<SweepRow> rows;
    if (kb_axis) {
        const double target = config.target_success.front();
        for (std::size_t size : config.kb_sizes) {
            if (size == 0) throw PreconditionError("sweep: kb size must be >= 1");
            knowledge::KnowledgeBase truncated;
            truncated.embedding_dim = kb.embedding_dim;
            truncated.provenance = kb.provenance;
            std::size_t keep = std::min(size, kb.size());
            truncated.entries.assign(kb.entries.begin(),
                                     kb.entries.begin() + static_cast<std::ptrdiff_t>(keep));
            auto calib_scored = score_all(calibration_set, truncated, config.mode, backends,
                                          templates, config);
            auto scores = calibration_scores(calib_scored, config.mode, config.skip_budget, log);
            double eps = config.delta_adjust
                             ? conformal::choose_epsilon_hat(target, static_cast<int>(scores.size()),
                                                             config.delta)
                             : 1.0 - target;
            double q = conformal::calibrate(scores, eps);
            auto test_scored = score_all(test_set, truncated, config.mode, backends, templates,
                                         config);
            rows.push_back(sweep_row("kb_size", static_cast<double>(keep), eps, q, test_scored,
                                     config.mode));
        }
    } else {
        // One pass of model queries; each target only re-derives the quantile.
        auto calib_scored = score_all(calibration_set, kb, config.mode, backends, templates,
                                      config);
        auto scores = calibration_scores(calib_scored, config.mode, config.skip_budget, log);
        auto test_scored = score_all(test_set, kb, config.mode, backends, templates, config);
        for (double target : config.target_success) {
            double eps = config.delta_adjust
                             ? conformal::choose_epsilon_hat(target, static_cast<int>(scores.size()),
                                                             config.delta)
                             : 1.0 - target;
            double q = conformal::calibrate(scores, eps);
            rows.push_back(sweep_row("target", target, eps, q, test_scored, config.mode));
        }
    }

    const std::string path = config.output_dir + "/sweep.tsv";
    write_sweep_table(rows, path);
    log << "sweep: " << rows.size() << " rows -> " << path << "\n";
    return rows;
}

// ---------------------------------------------------------------------------
// verify-coverage
// ---------------------------------------------------------------------------

bool CoverageReport::mean_ok() const {
    return std::fabs(mean_coverage - analytic_mean) <= mean_tolerance;
}

bool CoverageReport::quantile_ok() const {
    return empirical_delta_quantile >= analytic_bound - quantile_tolerance;
}

nlohmann::json CoverageReport::to_json() const {
    return nlohmann::json{{"n", n},
                          {"epsilon_hat", epsilon_hat},
                          {"trials", trials},
                          {"tests_per_trial", tests_per_trial},
                          {"delta", delta},
                          {"seed", seed},
                          {"multilabel", multilabel},
                          {"mean_coverage", mean_coverage},
                          {"analytic_mean", analytic_mean},
                          {"empirical_delta_quantile", empirical_delta_quantile},
                          {"analytic_bound", analytic_bound},
                          {"mean_ok", mean_ok()},
                          {"quantile_ok", quantile_ok()},
                          {"passed", passed()}};
}

namespace {

// One multilabel score instance: joint confidences over the 7 subsets of
// {A, B, C}, concentrated on a uniformly drawn true subset. Returns the
// drawn confidences and the true subset's index.
std::pair<std::vector<double>, std::size_t> draw_set_instance(rng::CounterRng& rng) {
    std::size_t true_idx = static_cast<std::size_t>(rng.next_below(7));
    std::vector<double> concentration(7, 1.0);
    concentration[true_idx] = 4.0;
    return {rng.next_dirichlet(concentration), true_idx};
}

}  // namespace

CoverageReport verify_coverage(int n, double epsilon_hat, int trials, int tests_per_trial,
                               double delta, std::uint64_t seed, bool multilabel) {
    if (trials < 100) throw PreconditionError("verify_coverage: trials must be >= 100");
    if (n < 1 || tests_per_trial < 1) {
        throw PreconditionError("verify_coverage: n and tests_per_trial must be >= 1");
    }
    if (!(epsilon_hat > 0.0 && epsilon_hat < 1.0)) {
        throw PreconditionError("verify_coverage: epsilon_hat must lie in (0, 1)");
    }

    CoverageReport report;
    report.n = n;
    report.epsilon_hat = epsilon_hat;
    report.trials = trials;
    report.tests_per_trial = tests_per_trial;
    report.delta = delta;
    report.seed = seed;
    report.multilabel = multilabel;

    const LabelSet three_labels = {OptionLabel('A'), OptionLabel('B'), OptionLabel('C')};
    const auto powerset = conformal::nonempty_powerset(three_labels);

    std::vector<double> coverages;
    coverages.reserve(static_cast<std::size_t>(trials));
    double total = 0.0;
    for (int t = 0; t < trials; ++t) {
        auto trial_rng = rng::CounterRng::derive(seed, "verify|" + std::to_string(t));
        double covered = 0.0;
        if (!multilabel) {
            std::vector<double> scores(static_cast<std::size_t>(n));
            for (auto& s : scores) s = trial_rng.next_double();
            double q_hat = conformal::calibrate(std::move(scores), epsilon_hat);
            const OptionLabel true_label('A');
            for (int i = 0; i < tests_per_trial; ++i) {
                double s = trial_rng.next_double();
                auto confidences = LabelConfidences::from_weights(
                    {{true_label, 1.0 - s}, {OptionLabel('B'), s}});
                auto set = conformal::predict_set(confidences, q_hat);
                covered += set.count(true_label) > 0;
            }
        } else {
            std::vector<double> scores;
            scores.reserve(static_cast<std::size_t>(n));
            for (int i = 0; i < n; ++i) {
                auto [h, true_idx] = draw_set_instance(trial_rng);
                scores.push_back(1.0 - h[true_idx]);
            }
            double q_hat = conformal::multilabel_calibrate(std::move(scores), epsilon_hat);
            for (int i = 0; i < tests_per_trial; ++i) {
                auto [h, true_idx] = draw_set_instance(trial_rng);
                conformal::SetConfidences set_confidences;
                for (std::size_t k = 0; k < powerset.size(); ++k) {
                    set_confidences[powerset[k]] = h[k];
                }
                auto family = conformal::multilabel_predict(set_confidences, q_hat);
                bool in_family = false;
                for (const auto& member : family) {
                    in_family = in_family || member == powerset[true_idx];
                }
                covered += in_family;
            }
        }
        double coverage = covered / static_cast<double>(tests_per_trial);
        coverages.push_back(coverage);
        total += coverage;
    }

    report.mean_coverage = total / static_cast<double>(trials);
    long k = static_cast<long>(std::ceil((n + 1) * (1.0 - epsilon_hat) - 1e-9));
    report.analytic_mean = std::min(1.0, static_cast<double>(k) / static_cast<double>(n + 1));
    report.analytic_bound = conformal::coverage_lower_bound(n, epsilon_hat, delta);

    std::sort(coverages.begin(), coverages.end());
    auto rank = static_cast<std::size_t>(
        std::max<long>(1, static_cast<long>(std::ceil(delta * trials))));
    report.empirical_delta_quantile = coverages[rank - 1];
    return report;
}

// ---------------------------------------------------------------------------
// plan
// ---------------------------------------------------------------------------

PlanCommandResult cmd_plan(const RunConfig& config, const Scenario& scenario, bool interactive,
                           std::istream& in, std::ostream& out) {
    auto kb = knowledge::load_kb(config.kb_path);
    auto templates = prompting::TemplateSet::load(config.templates_dir);
    auto backends = make_backends(config);
    if (backends.synthetic_text) backends.synthetic_text->register_scenario(scenario);

    planner::PlannerConfig planner_config;
    planner_config.mode = config.mode;
    planner_config.m = config.m;
    planner_config.safety_mode = config.safety_mode;
    if (config.mode != PredictionMode::direct) {
        planner_config.calibration = load_artifact_checked(config, templates);
    }

    planner::PlanTrace trace;
    PlanCommandResult result;
    result.outcome = planner::plan(scenario, kb, planner_config, *backends.text,
                                   *backends.embedding, templates, &trace);

    out << "Scenario: " << scenario.id << "\n";
    out << "Task: " << scenario.instruction << "\n";
    out << "Options:\n";
    for (const auto& o : trace.options) {
        out << "  " << o.label.letter() << ") " << o.text << "\n";
    }
    out << "Rationale: " << trace.rationale << "\n";
    if (result.outcome.mode == PredictionMode::conformal_multi) {
        out << "Prediction family:";
        for (const auto& member : result.outcome.family) {
            out << " " << label_set_to_string(member);
        }
        out << "\n";
    }
    out << "Prediction set: " << label_set_to_string(result.outcome.flattened()) << "\n";

    auto print_action = [&](OptionLabel label) {
        for (const auto& o : trace.options) {
            if (o.label == label) {
                out << "Action: " << o.label.letter() << ") " << o.text << "\n";
                return;
            }
        }
        out << "Action: " << label.letter() << "\n";
    };

    if (result.outcome.certain) {
        print_action(*result.outcome.flattened().begin());
        return result;
    }

    auto offered = result.outcome.flattened();
    out << "Clarification needed. Which of these matches your intent?\n";
    for (const auto& l : offered) {
        for (const auto& o : trace.options) {
            if (o.label == l) out << "  " << o.label.letter() << ") " << o.text << "\n";
        }
    }
    if (offered.empty()) out << "  (no option met the confidence threshold)\n";

    if (!interactive) {
        result.needs_clarification = true;
        return result;
    }
    out << "Enter option letter: " << std::flush;
    std::string line;
    while (std::getline(in, line)) {
        auto pos = line.find_first_not_of(" \t");
        if (pos != std::string::npos && line[pos] >= 'A' && line[pos] <= 'Z' &&
            offered.count(OptionLabel(line[pos]))) {
            print_action(OptionLabel(line[pos]));
            return result;
        }
        out << "Please pick one of " << label_set_to_string(offered) << ": " << std::flush;
    }
    result.needs_clarification = true;
    return result;
}

}  // namespace introplan::harness
