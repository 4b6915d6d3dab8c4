#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "introplan/errors.hpp"
#include "introplan/knowledge.hpp"
#include "introplan/rng.hpp"
#include "introplan/synthetic.hpp"
#include "support/fake_backend.hpp"
#include "support/oracles.hpp"

using namespace introplan;
using namespace introplan::knowledge;

namespace {

prompting::TemplateSet load_templates() {
    return prompting::TemplateSet::load(std::string(INTROPLAN_SOURCE_DIR) + "/templates");
}

Scenario coke_sprite_scenario(const std::string& id, const std::string& instruction) {
    Scenario s;
    s.id = id;
    s.scene = "On the counter, there is a Coke, a Sprite, and a sponge.";
    s.instruction = instruction;
    s.observation = s.scene;
    s.kind = ScenarioKind::multi_label;
    auto opts = assign_labels({"pick up the Coke", "pick up the Sprite", kEscapeOptionText});
    opts[0].is_valid = true;
    opts[0].is_intent = true;
    opts[1].is_valid = true;
    s.options = opts;
    return s;
}

KnowledgeEntry make_entry(const std::string& id, const std::string& instruction,
                          SyntheticEmbeddingBackend& embedder) {
    KnowledgeEntry e;
    e.scenario = coke_sprite_scenario(id, instruction);
    e.candidates = e.scenario.options;
    e.rationale = "Either drink satisfies the request.";
    e.valid_labels = {OptionLabel('A'), OptionLabel('B')};
    e.key = embedder.embed(instruction);
    return e;
}

}  // namespace

TEST_CASE("generate_choices parses the lettered list and appends the escape option") {
    auto templates = load_templates();
    auto s = coke_sprite_scenario("gc-1", "Bring me a drink.");
    auto backend = testsupport::fixed_text_backend("A) pick up the Coke\nB) pick up the Sprite");
    auto options = generate_choices(s, backend, templates);
    REQUIRE(options.size() == 3);
    CHECK(options[2].label.letter() == 'C');
    CHECK(options[2].text == kEscapeOptionText);
    CHECK(options[2].is_escape);
}

TEST_CASE("generate_choices keeps an existing escape option without duplicating it") {
    auto templates = load_templates();
    auto s = coke_sprite_scenario("gc-2", "Bring me a drink.");
    auto backend = testsupport::fixed_text_backend(
        "A) pick up the Coke\nB) pick up the Sprite\nC) an option not listed here\nD) do nothing");
    auto options = generate_choices(s, backend, templates);
    REQUIRE(options.size() == 4);
    std::size_t escapes = 0;
    for (const auto& o : options) escapes += o.is_escape;
    CHECK(escapes == 1);
}

TEST_CASE("generate_choices reprompts once, then reports a format error") {
    auto templates = load_templates();
    auto s = coke_sprite_scenario("gc-3", "Bring me a drink.");
    auto backend = testsupport::fixed_text_backend("I would pick up the Coke for you.");
    CHECK_THROWS_AS(generate_choices(s, backend, templates), GenerationFormatError);
    CHECK(backend.calls == 2);
}

TEST_CASE("generate_rationale conditions on the ground-truth letters") {
    auto templates = load_templates();
    auto s = coke_sprite_scenario("gr-1", "Can you dispose of the can? It should have expired.");
    std::string seen_prompt;
    testsupport::CallbackBackend backend([&](const CompletionRequest& request) {
        seen_prompt = request.prompt;
        CompletionResponse r;
        r.text = "Both cans match the description, so options A and B are valid.";
        return r;
    });
    auto rationale = generate_rationale(s, s.options, {OptionLabel('A'), OptionLabel('B')},
                                        backend, templates);
    CHECK_FALSE(rationale.empty());
    CHECK(seen_prompt.find("Correct Action(s): A, B") != std::string::npos);

    CHECK_THROWS_AS(generate_rationale(s, s.options, {OptionLabel('Z')}, backend, templates),
                    PreconditionError);
}

TEST_CASE("generate_rationale keeps only the first paragraph and retries empties") {
    auto templates = load_templates();
    auto s = coke_sprite_scenario("gr-2", "Dispose of the can.");
    auto backend = testsupport::fixed_text_backend(
        "The first paragraph explains the choice.\n\nScene: leaked next exemplar");
    CHECK(generate_rationale(s, s.options, {OptionLabel('A')}, backend, templates) ==
          "The first paragraph explains the choice.");

    auto empty_backend = testsupport::fixed_text_backend("   ");
    CHECK_THROWS_AS(generate_rationale(s, s.options, {OptionLabel('A')}, empty_backend, templates),
                    GenerationFormatError);
    CHECK(empty_backend.calls == 2);
}

TEST_CASE("build over an empty training set yields an empty knowledge base") {
    auto templates = load_templates();
    auto backend = testsupport::fixed_text_backend("unused");
    SyntheticEmbeddingBackend embedder(1, 16);
    BuildReport report;
    auto kb = build_knowledge_base({}, backend, embedder, templates, {}, &report);
    CHECK(kb.empty());
    CHECK(report.attempted == 0);
}

TEST_CASE("three-scenario fixture builds three valid entries with no issues") {
    auto templates = load_templates();
    SyntheticModelParams params;
    params.seed = 21;
    SyntheticTextBackend backend(params);
    SyntheticEmbeddingBackend embedder(21, 16);
    std::vector<Scenario> train = {
        coke_sprite_scenario("kb-1", "Bring me a drink."),
        coke_sprite_scenario("kb-2", "Can you dispose of the can?"),
        coke_sprite_scenario("kb-3", "Hand me something cold."),
    };
    backend.register_scenarios(train);
    BuildReport report;
    auto kb = build_knowledge_base(train, backend, embedder, templates, {}, &report);
    REQUIRE(kb.size() == 3);
    CHECK(report.issues.empty());
    CHECK(kb.embedding_dim == 16);
    for (std::size_t i = 0; i < kb.size(); ++i) {
        CHECK(kb.entries[i].scenario.id == train[i].id);  // input order preserved
        CHECK(kb.entries[i].validate(kb.embedding_dim).empty());
        CHECK(kb.entries[i].valid_labels == LabelSet{OptionLabel('A'), OptionLabel('B')});
    }
}

TEST_CASE("an infallible backend builds exactly n entries, in parallel too") {
    auto templates = load_templates();
    SyntheticModelParams params;
    params.seed = 22;
    SyntheticTextBackend backend(params);
    SyntheticEmbeddingBackend embedder(22, 8);
    auto train = synth_dataset(40, {{ScenarioKind::unambiguous, 0.5},
                                    {ScenarioKind::multi_label, 0.5}}, 99);
    backend.register_scenarios(train);
    BuildOptions options;
    options.in_flight = 4;
    BuildReport report;
    auto kb = build_knowledge_base(train, backend, embedder, templates, options, &report);
    CHECK(kb.size() == 40);
    CHECK(report.skip_count() == 0);
    for (std::size_t i = 0; i < kb.size(); ++i) {
        CHECK(kb.entries[i].scenario.id == train[i].id);
    }
}

TEST_CASE("ground truth not covered by generated candidates is skipped or warned") {
    auto templates = load_templates();
    SyntheticEmbeddingBackend embedder(1, 8);
    auto s = coke_sprite_scenario("cov-1", "Bring me a drink.");

    // Candidates cover only one of the two valid options: entry + warning.
    testsupport::CallbackBackend partial([&](const CompletionRequest& request) {
        CompletionResponse r;
        r.text = request.prompt.find("You:") != std::string::npos
                     ? "Only the Coke matches."
                     : "A) pick up the Coke\nB) do nothing";
        return r;
    });
    BuildReport report;
    auto kb = build_knowledge_base({s}, partial, embedder, templates, {}, &report);
    REQUIRE(kb.size() == 1);
    REQUIRE(report.warning_count() == 1);
    CHECK(kb.entries[0].valid_labels == LabelSet{OptionLabel('A')});

    // Candidates cover nothing valid: instance skipped, build empty -> error.
    auto useless = testsupport::fixed_text_backend("A) do nothing\nB) sing a song");
    BuildReport skip_report;
    CHECK_THROWS_AS(build_knowledge_base({s}, useless, embedder, templates, {}, &skip_report),
                    EmptyBuildError);
}

TEST_CASE("retrieval ranks an identical instruction first with similarity 1") {
    SyntheticEmbeddingBackend embedder(5, 24);
    KnowledgeBase kb;
    kb.embedding_dim = 24;
    for (int i = 0; i < 5; ++i) {
        kb.entries.push_back(make_entry("r-" + std::to_string(i),
                                        "instruction number " + std::to_string(i), embedder));
    }
    auto hits = retrieve_similar("instruction number 3", kb, 3, embedder);
    REQUIRE(hits.size() == 3);
    CHECK(hits[0].entry->scenario.id == "r-3");
    CHECK(hits[0].similarity == doctest::Approx(1.0).epsilon(1e-6));

    auto clamped = retrieve_similar("whatever", kb, 10, embedder);
    CHECK(clamped.size() == 5);

    KnowledgeBase empty;
    CHECK_THROWS_AS(retrieve_similar("q", empty, 3, embedder), PreconditionError);
    CHECK_THROWS_AS(retrieve_similar("q", kb, 0, embedder), PreconditionError);
}

TEST_CASE("retrieval matches the brute-force full-sort oracle") {
    SyntheticEmbeddingBackend embedder(6, 24);
    KnowledgeBase kb;
    kb.embedding_dim = 24;
    for (int i = 0; i < 50; ++i) {
        kb.entries.push_back(make_entry("o-" + std::to_string(i),
                                        "random instruction " + std::to_string(i), embedder));
    }
    for (std::size_t m : {std::size_t{1}, std::size_t{3}, std::size_t{10}}) {
        for (int q = 0; q < 20; ++q) {
            std::string query = "query text " + std::to_string(q);
            auto query_key = embedder.embed(query);
            std::vector<double> sims;
            for (const auto& e : kb.entries) sims.push_back(cosine_similarity(query_key, e.key));
            auto expected = oracles::top_m_by_similarity(sims, m);
            auto hits = retrieve_similar(query, kb, m, embedder);
            REQUIRE(hits.size() == expected.size());
            for (std::size_t i = 0; i < hits.size(); ++i) {
                REQUIRE(hits[i].entry == &kb.entries[expected[i]]);
            }
        }
    }
}

TEST_CASE("ties between duplicate instructions fall to insertion order") {
    SyntheticEmbeddingBackend embedder(7, 16);
    KnowledgeBase kb;
    kb.embedding_dim = 16;
    kb.entries.push_back(make_entry("dup-first", "the same instruction", embedder));
    kb.entries.push_back(make_entry("dup-second", "the same instruction", embedder));
    kb.entries.push_back(make_entry("other", "something else entirely", embedder));
    auto hits = retrieve_similar("the same instruction", kb, 2, embedder);
    REQUIRE(hits.size() == 2);
    CHECK(hits[0].entry->scenario.id == "dup-first");
    CHECK(hits[1].entry->scenario.id == "dup-second");
}

TEST_CASE("save/load round trip preserves the knowledge base bit for bit") {
    const std::string path = "test_kb_roundtrip.jsonl";
    SyntheticEmbeddingBackend embedder(8, 12);
    KnowledgeBase kb;
    kb.embedding_dim = 12;
    kb.provenance = {"stub-backend", "stub-embed", "feedcafe00112233", "2024-05-01T00:00:00Z"};
    for (int i = 0; i < 3; ++i) {
        kb.entries.push_back(make_entry("rt-" + std::to_string(i),
                                        "instruction " + std::to_string(i), embedder));
    }
    save_kb(kb, path);
    auto loaded = load_kb(path);
    REQUIRE(loaded.size() == kb.size());
    CHECK(loaded.embedding_dim == kb.embedding_dim);
    CHECK(loaded.provenance.text_backend == kb.provenance.text_backend);
    CHECK(loaded.provenance.template_version == kb.provenance.template_version);
    for (std::size_t i = 0; i < kb.size(); ++i) {
        CHECK(loaded.entries[i].key.values == kb.entries[i].key.values);  // exact doubles
        CHECK(loaded.entries[i].scenario == kb.entries[i].scenario);
        CHECK(loaded.entries[i].candidates == kb.entries[i].candidates);
        CHECK(loaded.entries[i].rationale == kb.entries[i].rationale);
        CHECK(loaded.entries[i].valid_labels == kb.entries[i].valid_labels);
    }
    std::remove(path.c_str());
}

TEST_CASE("load rejects dimension mismatches, naming the offending entry") {
    const std::string path = "test_kb_dims.jsonl";
    SyntheticEmbeddingBackend e12(9, 12);
    SyntheticEmbeddingBackend e8(9, 8);
    KnowledgeBase kb;
    kb.embedding_dim = 12;
    kb.entries.push_back(make_entry("ok", "fine entry", e12));
    kb.entries.push_back(make_entry("short", "wrong dimension entry", e8));
    save_kb(kb, path);
    try {
        load_kb(path);
        FAIL("expected SchemaError");
    } catch (const SchemaError& e) {
        CHECK(e.line == 3);
        CHECK(std::string(e.what()).find("short") != std::string::npos);
    }
    std::remove(path.c_str());
}

TEST_CASE("load reports a truncated last line by number") {
    const std::string path = "test_kb_truncated.jsonl";
    SyntheticEmbeddingBackend embedder(10, 6);
    KnowledgeBase kb;
    kb.embedding_dim = 6;
    kb.entries.push_back(make_entry("t-0", "will survive", embedder));
    kb.entries.push_back(make_entry("t-1", "will be truncated", embedder));
    save_kb(kb, path);
    // Chop the file mid-way through the final record.
    std::ifstream in(path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    in.close();
    auto text = buffer.str();
    std::ofstream(path) << text.substr(0, text.size() - 40);
    try {
        load_kb(path);
        FAIL("expected SchemaError");
    } catch (const SchemaError& e) {
        CHECK(e.line == 3);
    }
    std::remove(path.c_str());
}

TEST_CASE("load rejects duplicate scenario ids") {
    const std::string path = "test_kb_dup.jsonl";
    SyntheticEmbeddingBackend embedder(11, 6);
    KnowledgeBase kb;
    kb.embedding_dim = 6;
    kb.entries.push_back(make_entry("same", "first", embedder));
    kb.entries.push_back(make_entry("same", "second", embedder));
    save_kb(kb, path);
    CHECK_THROWS_AS(load_kb(path), SchemaError);
    std::remove(path.c_str());
}

TEST_CASE("to_exemplar carries the block fields over") {
    SyntheticEmbeddingBackend embedder(12, 6);
    auto entry = make_entry("ex-1", "bring the drink", embedder);
    auto block = to_exemplar(entry);
    CHECK(block.scene == entry.scenario.scene);
    CHECK(block.task == entry.scenario.instruction);
    CHECK(block.options == entry.candidates);
    CHECK(block.rationale == entry.rationale);
    CHECK(block.prediction == entry.valid_labels);
}
