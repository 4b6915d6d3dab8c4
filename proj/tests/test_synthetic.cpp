#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "introplan/errors.hpp"
#include "introplan/synthetic.hpp"

using namespace introplan;

namespace {

Scenario two_valid_scenario(const std::string& id = "syn-test") {
    Scenario s;
    s.id = id;
    s.scene = "On the counter, there is a Coke, a Pepsi, and an apple.";
    // Streams are keyed by prompt content, so distinct cases need distinct
    // instructions.
    s.instruction = "Bring me that soda. (" + id + ")";
    s.observation = s.scene;
    s.kind = ScenarioKind::single_label;
    auto opts = assign_labels({"pick up the Coke", "pick up the Pepsi", "pick up the apple",
                               kEscapeOptionText});
    opts[0].is_valid = true;
    opts[0].is_intent = true;
    opts[1].is_valid = true;
    s.options = opts;
    return s;
}

}  // namespace

TEST_CASE("params validation") {
    SyntheticModelParams p;
    p.valid_concentration = 1.0;
    p.invalid_concentration = 2.0;
    CHECK_THROWS_AS(p.validate(), PreconditionError);
    p = {};
    p.escape_mass = 1.0;
    CHECK_THROWS_AS(p.validate(), PreconditionError);
    p = {};
    p.noise_scale = -0.1;
    CHECK_THROWS_AS(p.validate(), PreconditionError);
}

TEST_CASE("synth_confidences is deterministic and normalized") {
    auto s = two_valid_scenario();
    SyntheticModelParams params;
    params.seed = 41;
    auto c1 = synth_confidences(s, params);
    auto c2 = synth_confidences(s, params);
    REQUIRE(c1.entries().size() == 4);
    double total = 0.0;
    for (const auto& [label, value] : c1.entries()) {
        CHECK(value == c2.at(label));  // bit-identical
        total += value;
    }
    CHECK(std::fabs(total - 1.0) < 1e-9);
}

TEST_CASE("synth_confidences requires ground truth") {
    auto s = two_valid_scenario();
    for (auto& o : s.options) o.is_valid = o.is_intent = false;
    CHECK_THROWS_AS(synth_confidences(s, SyntheticModelParams{}), PreconditionError);
}

TEST_CASE("symmetric concentrations make labels exchangeable") {
    // With equal concentrations every label's mean confidence is 1/K.
    SyntheticModelParams params;
    params.seed = 17;
    params.valid_concentration = 2.0;
    params.invalid_concentration = 2.0 - 1e-12;  // validator needs valid > invalid
    std::map<char, double> mean;
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
        auto s = two_valid_scenario("exch-" + std::to_string(i));
        auto confidences = synth_confidences(s, params);
        for (const auto& [label, value] : confidences.entries()) {
            mean[label.letter()] += value;
        }
    }
    for (auto& [letter, total] : mean) {
        CHECK(std::fabs(total / n - 0.25) < 0.02);
    }
}

TEST_CASE("huge valid concentration pushes all mass onto the valid set") {
    SyntheticModelParams params;
    params.seed = 5;
    params.valid_concentration = 1e6;
    params.invalid_concentration = 1.0;
    params.noise_scale = 0.0;
    auto s = two_valid_scenario();
    auto c = synth_confidences(s, params);
    double valid_mass = c.at(OptionLabel('A')) + c.at(OptionLabel('B'));
    CHECK(valid_mass > 0.999);
}

TEST_CASE("permuting options permutes the confidences identically") {
    auto s = two_valid_scenario();
    SyntheticModelParams params;
    params.seed = 23;
    params.noise_scale = 0.3;
    auto baseline = synth_confidences(s, params);

    // Reverse the option order and relabel A.. in the new order.
    Scenario reversed = s;
    std::reverse(reversed.options.begin(), reversed.options.end());
    for (std::size_t i = 0; i < reversed.options.size(); ++i) {
        reversed.options[i].label = OptionLabel::from_index(i);
    }
    auto permuted = synth_confidences(reversed, params);

    for (std::size_t i = 0; i < s.options.size(); ++i) {
        const auto& text = s.options[i].text;
        for (std::size_t j = 0; j < reversed.options.size(); ++j) {
            if (reversed.options[j].text == text) {
                CHECK(baseline.at(s.options[i].label) == permuted.at(reversed.options[j].label));
            }
        }
    }
}

TEST_CASE("escape_mass boosts the escape option") {
    auto s = two_valid_scenario();
    SyntheticModelParams params;
    params.seed = 77;
    auto plain = synth_confidences(s, params);
    params.escape_mass = 0.5;
    auto boosted = synth_confidences(s, params);
    CHECK(boosted.at(OptionLabel('D')) > plain.at(OptionLabel('D')));
    CHECK(boosted.at(OptionLabel('D')) >= 0.5);
}

TEST_CASE("set confidences cover the powerset and favor the valid set") {
    auto s = two_valid_scenario();
    SyntheticModelParams params;
    params.seed = 3;
    params.valid_concentration = 64.0;
    auto h = synth_set_confidences(s, params);
    CHECK(h.size() == 15);  // 2^4 - 1
    LabelSet valid{OptionLabel('A'), OptionLabel('B')};
    double best = 0.0;
    LabelSet best_subset;
    for (const auto& [subset, value] : h) {
        if (value > best) {
            best = value;
            best_subset = subset;
        }
    }
    CHECK(best_subset == valid);
}

TEST_CASE("synthetic embeddings are unit vectors, deterministic, text-sensitive") {
    auto a1 = synthetic_embedding("abc", 9, 32);
    auto a2 = synthetic_embedding("abc", 9, 32);
    auto b = synthetic_embedding("abd", 9, 32);
    CHECK(a1.values == a2.values);
    CHECK(a1.values != b.values);
    CHECK(a1.dim() == 32);
    CHECK(a1.norm() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK_THROWS_AS(synthetic_embedding("", 9, 32), PreconditionError);

    SyntheticEmbeddingBackend backend(9, 32);
    CHECK(backend.embed("abc").values == a1.values);
}

TEST_CASE("synth_dataset honors counts, mixes, and invariants") {
    CHECK(synth_dataset(0, {{ScenarioKind::unambiguous, 1.0}}, 1).empty());
    CHECK_THROWS_AS(synth_dataset(10, {{ScenarioKind::unambiguous, 0.8}}, 1), PreconditionError);

    auto all_unambiguous = synth_dataset(100, {{ScenarioKind::unambiguous, 1.0}}, 2);
    REQUIRE(all_unambiguous.size() == 100);
    for (const auto& s : all_unambiguous) {
        CHECK(s.kind == ScenarioKind::unambiguous);
        CHECK(s.valid_labels().size() == 1);
        CHECK(validate_scenario(s).empty());
    }

    auto mixed = synth_dataset(
        200, {{ScenarioKind::unambiguous, 0.5}, {ScenarioKind::multi_label, 0.5}}, 3);
    std::size_t unambiguous = 0, multi = 0;
    for (const auto& s : mixed) {
        unambiguous += s.kind == ScenarioKind::unambiguous;
        multi += s.kind == ScenarioKind::multi_label;
    }
    CHECK(unambiguous == 100);
    CHECK(multi == 100);
}

TEST_CASE("every generated kind satisfies the domain invariants") {
    std::map<ScenarioKind, double> mix{
        {ScenarioKind::unambiguous, 0.12},        {ScenarioKind::single_label, 0.11},
        {ScenarioKind::multi_label, 0.11},        {ScenarioKind::spatially_ambiguous, 0.11},
        {ScenarioKind::unsafe, 0.11},             {ScenarioKind::winograd, 0.11},
        {ScenarioKind::creative, 0.11},           {ScenarioKind::unsafe_ambiguous, 0.11},
        {ScenarioKind::serious_unsafe, 0.11}};
    auto data = synth_dataset(300, mix, 4);
    REQUIRE(data.size() == 300);
    std::set<std::string> keys;
    for (const auto& s : data) {
        CAPTURE(s.id);
        CHECK(validate_scenario(s).empty());
        CHECK(s.has_ground_truth());
        CHECK(s.intent_label().has_value());
        CHECK(s.escape_label().has_value());
        CHECK(keys.insert(s.scene + '\x1f' + s.instruction).second);
        if (s.kind == ScenarioKind::serious_unsafe) {
            CHECK(s.valid_labels() == LabelSet{*s.escape_label()});
            CHECK(!s.unsafe_labels().empty());
        }
        if (s.kind == ScenarioKind::multi_label || s.kind == ScenarioKind::single_label) {
            CHECK(s.valid_labels().size() == 2);
        }
    }
}

TEST_CASE("ambiguous intents are sampled across the valid set") {
    auto data = synth_dataset(400, {{ScenarioKind::spatially_ambiguous, 1.0}}, 6);
    std::size_t first_valid_is_intent = 0;
    for (const auto& s : data) {
        auto valid = s.valid_labels();
        REQUIRE(valid.size() == 2);
        auto intent = *s.intent_label();
        CHECK(valid.count(intent) == 1);
        first_valid_is_intent += intent == *valid.begin();
    }
    // Uniform sampling puts the intent on the first valid option about half
    // the time.
    CHECK(first_valid_is_intent > 140);
    CHECK(first_valid_is_intent < 260);
}

TEST_CASE("dataset generation is reproducible") {
    auto a = synth_dataset(50, {{ScenarioKind::unambiguous, 0.5}, {ScenarioKind::unsafe, 0.5}}, 11);
    auto b = synth_dataset(50, {{ScenarioKind::unambiguous, 0.5}, {ScenarioKind::unsafe, 0.5}}, 11);
    CHECK(a == b);
    auto c = synth_dataset(50, {{ScenarioKind::unambiguous, 0.5}, {ScenarioKind::unsafe, 0.5}}, 12);
    CHECK(a != c);
}
