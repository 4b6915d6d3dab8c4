#include <doctest.h>

#include <cmath>

#include "introplan/betadist.hpp"
#include "support/oracles.hpp"

using introplan::stats::beta_quantile;
using introplan::stats::regularized_incomplete_beta;

TEST_CASE("closed forms: Beta(1,1) is uniform, Beta(2,1) is x^2") {
    for (double x : {0.1, 0.25, 0.5, 0.9}) {
        CHECK(regularized_incomplete_beta(x, 1.0, 1.0) == doctest::Approx(x).epsilon(1e-12));
        CHECK(regularized_incomplete_beta(x, 2.0, 1.0) == doctest::Approx(x * x).epsilon(1e-12));
        CHECK(regularized_incomplete_beta(x, 1.0, 2.0)
              == doctest::Approx(1.0 - (1.0 - x) * (1.0 - x)).epsilon(1e-12));
    }
}

TEST_CASE("cdf agrees with the quadrature oracle across shapes") {
    for (auto [a, b] : {std::pair{2.0, 3.0}, {0.5, 0.5}, {10.0, 2.0}, {341.0, 60.0}}) {
        for (double x : {0.05, 0.3, 0.5, 0.8, 0.85, 0.99}) {
            double lib = regularized_incomplete_beta(x, a, b);
            double orc = oracles::beta_cdf_quadrature(x, a, b);
            CHECK(lib == doctest::Approx(orc).epsilon(1e-8));
        }
    }
}

TEST_CASE("quantile inverts the cdf") {
    for (auto [a, b] : {std::pair{2.0, 3.0}, {0.5, 2.5}, {341.0, 60.0}}) {
        for (double p : {0.01, 0.1, 0.5, 0.9, 0.99}) {
            double x = beta_quantile(p, a, b);
            CHECK(regularized_incomplete_beta(x, a, b) == doctest::Approx(p).epsilon(1e-10));
        }
    }
}

TEST_CASE("quantile agrees with the bisection oracle") {
    // The pair the conformal bound cares about most: n=400, eps=0.15.
    double lib = beta_quantile(0.01, 341.0, 60.0);
    double orc = oracles::beta_inverse_bisection(0.01, 341.0, 60.0);
    CHECK(lib == doctest::Approx(orc).epsilon(1e-9));
    CHECK(lib == doctest::Approx(0.806501396898499).epsilon(1e-10));

    double median = beta_quantile(0.5, 341.0, 60.0);
    CHECK(median == doctest::Approx(oracles::beta_inverse_bisection(0.5, 341.0, 60.0)).epsilon(1e-9));
    CHECK(median == doctest::Approx(0.8509568096411577).epsilon(1e-10));
}

TEST_CASE("edge probabilities") {
    CHECK(beta_quantile(0.0, 3.0, 4.0) == 0.0);
    CHECK(beta_quantile(1.0, 3.0, 4.0) == 1.0);
    CHECK(regularized_incomplete_beta(0.0, 3.0, 4.0) == 0.0);
    CHECK(regularized_incomplete_beta(1.0, 3.0, 4.0) == 1.0);
}
