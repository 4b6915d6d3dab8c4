#include "introplan/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace introplan::rng {

std::string to_hex(std::uint64_t value) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[value & 0xf];
        value >>= 4;
    }
    return out;
}

std::uint64_t CounterRng::next_below(std::uint64_t bound) {
    if (bound == 0) throw std::invalid_argument("next_below: bound must be positive");
    // 128-bit multiply-shift; bias is negligible for the bounds used here
    // (option counts, dataset sizes) and the mapping stays platform-stable.
    unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * bound;
    return static_cast<std::uint64_t>(m >> 64);
}

double CounterRng::next_normal() {
    // Box-Muller. u1 is kept away from 0 so log() stays finite.
    double u1 = next_double();
    double u2 = next_double();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double CounterRng::next_gamma(double shape) {
    if (!(shape > 0.0)) throw std::invalid_argument("next_gamma: shape must be positive");
    if (shape < 1.0) {
        // Boost: Gamma(a) = Gamma(a+1) * U^{1/a}.
        double g = next_gamma(shape + 1.0);
        double u = next_double();
        if (u <= 0.0) u = 0x1.0p-53;
        return g * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x = next_normal();
        double v = 1.0 + c * x;
        if (v <= 0.0) continue;
        v = v * v * v;
        double u = next_double();
        if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
        if (u <= 0.0) u = 0x1.0p-53;
        if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
}

std::vector<double> CounterRng::next_dirichlet(const std::vector<double>& concentration) {
    std::vector<double> draw(concentration.size());
    double total = 0.0;
    for (std::size_t i = 0; i < concentration.size(); ++i) {
        draw[i] = next_gamma(concentration[i]);
        total += draw[i];
    }
    if (total <= 0.0) throw std::runtime_error("next_dirichlet: degenerate gamma draws");
    for (double& v : draw) v /= total;
    return draw;
}

}  // namespace introplan::rng
