#include <doctest.h>

#include <cmath>

#include "introplan/backends.hpp"
#include "introplan/errors.hpp"
#include "support/fake_backend.hpp"

using namespace introplan;

namespace {

std::vector<OptionLabel> labels(std::initializer_list<char> letters) {
    std::vector<OptionLabel> out;
    for (char c : letters) out.emplace_back(c);
    return out;
}

}  // namespace

TEST_CASE("extraction renormalizes exponentiated logprobs") {
    // softmax over exp(-0.1), exp(-2.3): 0.9002 / 0.0998.
    std::vector<TokenLogprob> top{{"A", -0.1}, {"B", -2.3}};
    auto c = extract_label_confidences(top, labels({'A', 'B'}));
    CHECK(c.at(OptionLabel('A')) == doctest::Approx(0.900).epsilon(1e-3));
    CHECK(c.at(OptionLabel('B')) == doctest::Approx(0.100).epsilon(1e-3));
}

TEST_CASE("extraction is invariant under a uniform logprob shift") {
    std::vector<TokenLogprob> base{{"A", -0.4}, {"B", -1.7}, {"C", -3.0}};
    std::vector<TokenLogprob> shifted;
    for (auto& e : base) shifted.push_back({e.token, e.logprob - 5.25});
    auto c0 = extract_label_confidences(base, labels({'A', 'B', 'C'}));
    auto c1 = extract_label_confidences(shifted, labels({'A', 'B', 'C'}));
    for (const auto& [label, value] : c0.entries()) {
        CHECK(c1.at(label) == doctest::Approx(value).epsilon(1e-12));
    }
}

TEST_CASE("singleton label normalizes to 1") {
    std::vector<TokenLogprob> top{{"A", -2.0}, {"The", -0.5}};
    auto c = extract_label_confidences(top, labels({'A'}));
    CHECK(c.at(OptionLabel('A')) == doctest::Approx(1.0));
}

TEST_CASE("absent labels get zero before renormalization") {
    std::vector<TokenLogprob> top{{"A", std::log(0.6)}, {"C", std::log(0.2)}};
    auto c = extract_label_confidences(top, labels({'A', 'B', 'C'}));
    CHECK(c.at(OptionLabel('B')) == 0.0);
    CHECK(c.at(OptionLabel('A')) == doctest::Approx(0.75));
    CHECK(c.at(OptionLabel('C')) == doctest::Approx(0.25));
}

TEST_CASE("whitespace-variant tokens match; ties take the max logprob") {
    std::vector<TokenLogprob> top{{" A", std::log(0.5)}, {"A", std::log(0.25)}, {"B", std::log(0.25)}};
    auto c = extract_label_confidences(top, labels({'A', 'B'}));
    // " A" (0.5) wins over "A" (0.25) for the A label.
    CHECK(c.at(OptionLabel('A')) == doctest::Approx(0.5 / 0.75));
}

TEST_CASE("no matching label is a degenerate distribution") {
    std::vector<TokenLogprob> top{{"The", -0.5}, {"robot", -1.0}};
    CHECK_THROWS_AS(extract_label_confidences(top, labels({'A', 'B'})),
                    DegenerateDistributionError);
}

TEST_CASE("duplicate or empty label lists are rejected") {
    std::vector<TokenLogprob> top{{"A", -0.5}};
    CHECK_THROWS_AS(extract_label_confidences(top, labels({'A', 'A'})), PreconditionError);
    CHECK_THROWS_AS(extract_label_confidences(top, {}), PreconditionError);
}

TEST_CASE("score_labels asks for one token with logprobs") {
    testsupport::CallbackBackend backend([](const CompletionRequest& request) {
        CHECK(request.max_tokens == 1);
        CHECK(request.logprob_top_k > 0);
        CHECK(request.temperature == 0.0);
        CompletionResponse r;
        r.text = "A";
        r.top_logprobs = {{{"A", -0.2}, {"B", -1.8}}};
        return r;
    });
    auto c = score_labels(backend, "which?", labels({'A', 'B'}));
    CHECK(c.size() == 2);
    CHECK(c.argmax() == OptionLabel('A'));
    CHECK(backend.calls == 1);
}

TEST_CASE("score_labels output sums to one") {
    testsupport::CallbackBackend backend([](const CompletionRequest&) {
        CompletionResponse r;
        r.text = "B";
        r.top_logprobs = {{{"A", -3.0}, {"B", -0.3}, {"C", -2.0}, {"D", -9.9}}};
        return r;
    });
    auto c = score_labels(backend, "p", labels({'A', 'B', 'C', 'D'}));
    double total = 0.0;
    for (const auto& [_, v] : c.entries()) total += v;
    CHECK(std::fabs(total - 1.0) < 1e-9);
}

TEST_CASE("score_labels without logprobs fails loudly") {
    auto backend = testsupport::fixed_text_backend("A");
    CHECK_THROWS_AS(score_labels(backend, "p", labels({'A'})), DegenerateDistributionError);
}

TEST_CASE("cosine similarity basics") {
    EmbeddingVector u{{1.0, 0.0}};
    EmbeddingVector v{{0.0, 1.0}};
    EmbeddingVector w{{1.0, 0.0}};
    CHECK(cosine_similarity(u, v) == doctest::Approx(0.0));
    CHECK(cosine_similarity(u, w) == doctest::Approx(1.0));
    EmbeddingVector zero{{0.0, 0.0}};
    CHECK_THROWS_AS(cosine_similarity(u, zero), PreconditionError);
    EmbeddingVector longer{{1.0, 0.0, 0.0}};
    CHECK_THROWS_AS(cosine_similarity(u, longer), PreconditionError);
}
