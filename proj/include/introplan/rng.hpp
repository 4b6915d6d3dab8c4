#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace introplan::rng {

// 64-bit FNV-1a. Used for stream derivation and for request/prompt hashing.
constexpr std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::string to_hex(std::uint64_t value);

constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// Counter-based generator: the i-th output is a pure function of
// (key, i), so independent streams are cheap and replay is exact on any
// platform. All randomness in the library flows through explicit seeds and
// named streams; there is no global RNG.
class CounterRng {
public:
    explicit CounterRng(std::uint64_t key) : key_(key) {}

    // Derives an independent stream from a root seed and a textual label.
    static CounterRng derive(std::uint64_t seed, std::string_view stream) {
        return CounterRng(splitmix64(seed ^ fnv1a64(stream)));
    }

    CounterRng derive(std::string_view stream) const {
        return CounterRng(splitmix64(key_ ^ fnv1a64(stream)));
    }

    std::uint64_t next_u64() { return splitmix64(key_ + counter_++ * 0x9e3779b97f4a7c15ull); }

    // Uniform on [0, 1) with 53 bits of precision.
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform integer on [0, bound) via rejection-free Lemire reduction.
    std::uint64_t next_below(std::uint64_t bound);

    // Standard normal (Box-Muller, cosine branch only; two uniforms per draw).
    double next_normal();

    // Gamma(shape, 1) via Marsaglia-Tsang squeeze, boosted for shape < 1.
    double next_gamma(double shape);

    // Dirichlet draw: normalized vector of independent gammas.
    std::vector<double> next_dirichlet(const std::vector<double>& concentration);

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace introplan::rng
