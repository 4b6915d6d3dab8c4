#include "introplan/knowledge.hpp"

#include <algorithm>
#include <cctype>
#include <ctime>
#include <fstream>
#include <set>
#include <variant>

#include <json.hpp>

#include "introplan/errors.hpp"
#include "introplan/parallel.hpp"

namespace introplan::knowledge {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::string normalized(const std::string& s) {
    std::string out = trim(s);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::string utc_now_iso8601() {
    std::time_t t = std::time(nullptr);
    char buf[32];
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace

std::vector<std::string> KnowledgeEntry::validate(std::size_t expected_dim) const {
    std::vector<std::string> violations;
    auto report = [&](const std::string& msg) {
        violations.push_back("entry '" + scenario.id + "': " + msg);
    };
    if (key.dim() != expected_dim) {
        report("key dimension " + std::to_string(key.dim()) + " differs from knowledge base " +
               std::to_string(expected_dim));
    }
    for (double v : key.values) {
        if (!std::isfinite(v)) {
            report("key has a non-finite component");
            break;
        }
    }
    if (trim(rationale).empty()) report("rationale is empty");
    if (valid_labels.empty()) report("valid set is empty");
    LabelSet candidate_labels;
    for (const auto& o : candidates) candidate_labels.insert(o.label);
    for (const auto& l : valid_labels) {
        if (!candidate_labels.count(l)) {
            report("valid label " + l.str() + " is not a candidate");
        }
    }
    return violations;
}

std::size_t BuildReport::skip_count() const {
    std::size_t n = 0;
    for (const auto& i : issues) n += i.kind == BuildIssue::Kind::skipped;
    return n;
}

std::size_t BuildReport::warning_count() const {
    std::size_t n = 0;
    for (const auto& i : issues) n += i.kind == BuildIssue::Kind::coverage_warning;
    return n;
}

std::vector<PlanOption> generate_choices(const Scenario& s, TextBackend& backend,
                                         const prompting::TemplateSet& templates,
                                         const prompting::RenderOptions& opts) {
    if (trim(s.instruction).empty() || trim(s.scene).empty()) {
        throw PreconditionError("generate_choices: scenario '" + s.id +
                                "' needs both instruction and scene");
    }
    CompletionRequest request;
    request.prompt = prompting::render_option_gen_prompt(s, templates, opts);
    request.max_tokens = 256;

    std::vector<PlanOption> options;
    std::string last_text;
    for (int attempt = 0; attempt < 2 && options.empty(); ++attempt) {
        last_text = backend.complete(request).text;
        options = prompting::parse_option_lines(last_text);
    }
    if (options.empty()) {
        throw GenerationFormatError("generate_choices: no lettered options in model output",
                                    last_text);
    }
    bool has_escape = false;
    for (const auto& o : options) has_escape = has_escape || o.is_escape;
    if (!has_escape) {
        PlanOption escape;
        escape.label = OptionLabel::from_index(options.size());
        escape.text = kEscapeOptionText;
        escape.is_escape = true;
        options.push_back(std::move(escape));
    }
    return options;
}

std::string generate_rationale(const Scenario& s, const std::vector<PlanOption>& candidates,
                               const LabelSet& valid_labels, TextBackend& backend,
                               const prompting::TemplateSet& templates,
                               const prompting::RenderOptions& opts) {
    CompletionRequest request;
    request.prompt = prompting::render_knowledge_gen_prompt(s, candidates, valid_labels, templates,
                                                            opts);
    request.max_tokens = 384;

    std::string rationale;
    for (int attempt = 0; attempt < 2 && rationale.empty(); ++attempt) {
        std::string text = backend.complete(request).text;
        // Few-shot completions sometimes run on into the next exemplar; keep
        // only the first paragraph.
        auto cut = text.find("\n\n");
        if (cut != std::string::npos) text = text.substr(0, cut);
        cut = text.find("\nScene:");
        if (cut != std::string::npos) text = text.substr(0, cut);
        rationale = trim(text);
    }
    if (rationale.empty()) {
        throw GenerationFormatError("generate_rationale: empty model output after retry");
    }
    return rationale;
}

namespace {

struct InstanceResult {
    std::optional<KnowledgeEntry> entry;
    std::vector<BuildIssue> issues;
};

InstanceResult build_one(const Scenario& s, TextBackend& backend, EmbeddingBackend& embed_backend,
                         const prompting::TemplateSet& templates, const BuildOptions& options) {
    InstanceResult result;
    auto skip = [&](const std::string& detail) {
        result.entry.reset();
        result.issues.push_back({BuildIssue::Kind::skipped, s.id, detail});
    };
    try {
        auto violations = validate_scenario(s);
        if (!violations.empty()) {
            skip("invalid scenario: " + violations.front());
            return result;
        }
        if (!s.has_ground_truth()) {
            skip("no ground-truth valid options");
            return result;
        }
        prompting::RenderOptions render_opts{options.safety_mode, options.exemplar_limit};
        KnowledgeEntry entry;
        entry.scenario = s;
        entry.candidates = generate_choices(s, backend, templates, render_opts);

        // Map ground-truth valid option texts onto the generated candidates.
        std::set<std::string> valid_texts;
        for (const auto& o : s.options) {
            if (o.is_valid) valid_texts.insert(normalized(o.text));
        }
        std::set<std::string> covered;
        for (const auto& c : entry.candidates) {
            if (valid_texts.count(normalized(c.text))) {
                entry.valid_labels.insert(c.label);
                covered.insert(normalized(c.text));
            }
        }
        if (entry.valid_labels.empty()) {
            skip("no generated candidate matches a ground-truth valid option");
            return result;
        }
        if (covered.size() < valid_texts.size()) {
            result.issues.push_back(
                {BuildIssue::Kind::coverage_warning, s.id,
                 "generated candidates cover " + std::to_string(covered.size()) + " of " +
                     std::to_string(valid_texts.size()) + " ground-truth valid options"});
        }
        entry.rationale =
            generate_rationale(s, entry.candidates, entry.valid_labels, backend, templates,
                               render_opts);
        entry.key = embed_backend.embed(s.instruction);
        result.entry = std::move(entry);
    } catch (const Error& e) {
        skip(e.what());
    }
    return result;
}

}  // namespace

KnowledgeBase build_knowledge_base(const std::vector<Scenario>& train, TextBackend& backend,
                                   EmbeddingBackend& embed_backend,
                                   const prompting::TemplateSet& templates,
                                   const BuildOptions& options, BuildReport* report) {
    KnowledgeBase kb;
    kb.embedding_dim = embed_backend.dim();
    kb.provenance = {backend.id(), embed_backend.id(), templates.version(), utc_now_iso8601()};

    BuildReport local;
    local.attempted = train.size();
    if (!train.empty()) {
        auto results = parallel_map(
            train,
            [&](const Scenario& s, std::size_t) {
                return build_one(s, backend, embed_backend, templates, options);
            },
            options.in_flight);
        for (auto& r : results) {
            for (auto& issue : r.issues) local.issues.push_back(std::move(issue));
            if (r.entry) kb.entries.push_back(std::move(*r.entry));
        }
    }
    local.built = kb.entries.size();
    if (report) *report = local;
    if (!train.empty() && kb.entries.empty()) {
        throw EmptyBuildError("build_knowledge_base: all " + std::to_string(train.size()) +
                              " instances failed");
    }
    return kb;
}

std::vector<RetrievalHit> retrieve_similar(const std::string& query, const KnowledgeBase& kb,
                                           std::size_t m, EmbeddingBackend& embed_backend) {
    if (kb.empty()) throw PreconditionError("retrieve_similar: knowledge base is empty");
    if (m < 1) throw PreconditionError("retrieve_similar: m must be >= 1");
    auto query_key = embed_backend.embed(query);

    std::vector<RetrievalHit> hits;
    hits.reserve(kb.size());
    for (const auto& entry : kb.entries) {
        hits.push_back({&entry, cosine_similarity(query_key, entry.key)});
    }
    // Stable: equal similarities keep insertion order.
    std::stable_sort(hits.begin(), hits.end(),
                     [](const RetrievalHit& a, const RetrievalHit& b) {
                         return a.similarity > b.similarity;
                     });
    hits.resize(std::min(m, hits.size()));
    return hits;
}

prompting::ExemplarBlock to_exemplar(const KnowledgeEntry& entry) {
    prompting::ExemplarBlock block;
    block.scene = entry.scenario.scene;
    block.task = entry.scenario.instruction;
    block.options = entry.candidates;
    block.rationale = entry.rationale;
    block.prediction = entry.valid_labels;
    return block;
}

namespace {

nlohmann::json entry_to_json(const KnowledgeEntry& entry) {
    nlohmann::json candidates = nlohmann::json::array();
    for (const auto& c : entry.candidates) candidates.push_back(to_json(c));
    nlohmann::json valid = nlohmann::json::array();
    for (const auto& l : entry.valid_labels) valid.push_back(l.str());
    return nlohmann::json{{"key", entry.key.values},
                          {"scenario", to_json(entry.scenario)},
                          {"candidates", std::move(candidates)},
                          {"rationale", entry.rationale},
                          {"valid_labels", std::move(valid)}};
}

KnowledgeEntry entry_from_json(const nlohmann::json& j) {
    KnowledgeEntry entry;
    entry.key.values = j.at("key").get<std::vector<double>>();
    entry.scenario = scenario_from_json(j.at("scenario"));
    for (const auto& cj : j.at("candidates")) entry.candidates.push_back(plan_option_from_json(cj));
    entry.rationale = j.at("rationale").get<std::string>();
    for (const auto& lj : j.at("valid_labels")) {
        auto s = lj.get<std::string>();
        if (s.size() != 1) throw SchemaError("valid label must be a single letter");
        entry.valid_labels.insert(OptionLabel(s[0]));
    }
    return entry;
}

}  // namespace

void save_kb(const KnowledgeBase& kb, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw SchemaError("cannot write knowledge base '" + path + "'");
    nlohmann::json header{{"schema_version", 1},
                          {"embedding_dim", kb.embedding_dim},
                          {"provenance",
                           {{"text_backend", kb.provenance.text_backend},
                            {"embed_backend", kb.provenance.embed_backend},
                            {"template_version", kb.provenance.template_version},
                            {"built_at", kb.provenance.built_at}}}};
    out << header.dump() << "\n";
    for (const auto& entry : kb.entries) {
        out << entry_to_json(entry).dump() << "\n";
    }
}

KnowledgeBase load_kb(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SchemaError("cannot open knowledge base '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw SchemaError(path + ": missing header line", 1);

    KnowledgeBase kb;
    try {
        auto header = nlohmann::json::parse(line);
        if (header.at("schema_version").get<int>() != 1) {
            throw SchemaError(path + ": unsupported schema version", 1);
        }
        kb.embedding_dim = header.at("embedding_dim").get<std::size_t>();
        const auto& prov = header.at("provenance");
        kb.provenance.text_backend = prov.value("text_backend", "");
        kb.provenance.embed_backend = prov.value("embed_backend", "");
        kb.provenance.template_version = prov.value("template_version", "");
        kb.provenance.built_at = prov.value("built_at", "");
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(path + ":1: corrupt header: " + e.what(), 1);
    }

    std::set<std::string> seen_ids;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        KnowledgeEntry entry;
        try {
            entry = entry_from_json(nlohmann::json::parse(line));
        } catch (const nlohmann::json::exception& e) {
            throw SchemaError(path + ":" + std::to_string(line_no) + ": corrupt line: " + e.what(),
                              line_no);
        } catch (const SchemaError& e) {
            throw SchemaError(path + ":" + std::to_string(line_no) + ": " + e.what(), line_no);
        }
        auto violations = entry.validate(kb.embedding_dim);
        if (!violations.empty()) {
            throw SchemaError(path + ":" + std::to_string(line_no) + ": " + violations.front(),
                              line_no);
        }
        if (!seen_ids.insert(entry.scenario.id).second) {
            throw SchemaError(path + ":" + std::to_string(line_no) + ": duplicate scenario id '" +
                                  entry.scenario.id + "'",
                              line_no);
        }
        kb.entries.push_back(std::move(entry));
    }
    return kb;
}

}  // namespace introplan::knowledge
