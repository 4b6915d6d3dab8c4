#include <doctest.h>
#include <string>

#include <cmath>
#include <map>

#include "introplan/rng.hpp"

using introplan::rng::CounterRng;

TEST_CASE("streams are deterministic and independent") {
    auto a1 = CounterRng::derive(42, "alpha");
    auto a2 = CounterRng::derive(42, "alpha");
    auto b = CounterRng::derive(42, "beta");
    std::uint64_t va = a1.next_u64();
    CHECK(va == a2.next_u64());
    CHECK(va != b.next_u64());
    CHECK(CounterRng::derive(43, "alpha").next_u64() != va);
}

TEST_CASE("uniform doubles live in [0,1) and have a sane mean") {
    auto rng = CounterRng::derive(7, "uniform");
    double sum = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        double u = rng.next_double();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        sum += u;
    }
    CHECK(std::fabs(sum / n - 0.5) < 0.005);
}

TEST_CASE("next_below covers its range roughly uniformly") {
    auto rng = CounterRng::derive(7, "below");
    std::map<std::uint64_t, int> counts;
    const int n = 60000;
    for (int i = 0; i < n; ++i) counts[rng.next_below(6)]++;
    REQUIRE(counts.size() == 6);
    for (const auto& [value, count] : counts) {
        CHECK(value < 6);
        CHECK(std::fabs(count / double(n) - 1.0 / 6.0) < 0.01);
    }
}

TEST_CASE("normal draws have mean 0 and variance 1") {
    auto rng = CounterRng::derive(11, "normal");
    double sum = 0.0, sq = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        double z = rng.next_normal();
        sum += z;
        sq += z * z;
    }
    CHECK(std::fabs(sum / n) < 0.02);
    CHECK(std::fabs(sq / n - 1.0) < 0.03);
}

TEST_CASE("gamma matches its mean and variance for small and large shape") {
    for (double shape : {0.5, 1.0, 4.0, 100.0}) {
        auto rng = CounterRng::derive(13, "gamma" + std::to_string(shape));
        double sum = 0.0, sq = 0.0;
        const int n = 200000;
        for (int i = 0; i < n; ++i) {
            double g = rng.next_gamma(shape);
            REQUIRE(g > 0.0);
            sum += g;
            sq += g * g;
        }
        double mean = sum / n;
        double var = sq / n - mean * mean;
        CHECK(std::fabs(mean - shape) < 0.05 * shape + 0.01);
        CHECK(std::fabs(var - shape) < 0.08 * shape + 0.02);
    }
}

TEST_CASE("dirichlet draws normalize and concentrate where told") {
    auto rng = CounterRng::derive(17, "dirichlet");
    std::vector<double> mean(3, 0.0);
    const int n = 50000;
    for (int i = 0; i < n; ++i) {
        auto d = rng.next_dirichlet({8.0, 1.0, 1.0});
        double total = d[0] + d[1] + d[2];
        REQUIRE(std::fabs(total - 1.0) < 1e-12);
        for (int k = 0; k < 3; ++k) mean[k] += d[k];
    }
    CHECK(std::fabs(mean[0] / n - 0.8) < 0.01);
    CHECK(std::fabs(mean[1] / n - 0.1) < 0.01);
}
