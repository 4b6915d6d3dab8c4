#include "introplan/betadist.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace introplan::stats {

double log_beta(double a, double b) {
    return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

namespace {

// Continued fraction for I_x(a,b), modified Lentz algorithm.
double ibeta_continued_fraction(double x, double a, double b) {
    const double tiny = 1e-300;
    const double eps = 1e-15;
    const int max_iter = 500;

    double qab = a + b;
    double qap = a + 1.0;
    double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= max_iter; ++m) {
        double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < eps) break;
    }
    return h;
}

}  // namespace

double regularized_incomplete_beta(double x, double a, double b) {
    if (!(a > 0.0) || !(b > 0.0)) throw std::invalid_argument("ibeta: a, b must be positive");
    if (std::isnan(x)) return std::numeric_limits<double>::quiet_NaN();
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    double front = std::exp(a * std::log(x) + b * std::log1p(-x) - log_beta(a, b));
    // Symmetry pick keeps the continued fraction in its fast-converging regime.
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return front * ibeta_continued_fraction(x, a, b) / a;
    }
    return 1.0 - std::exp(b * std::log1p(-x) + a * std::log(x) - log_beta(b, a)) *
                     ibeta_continued_fraction(1.0 - x, b, a) / b;
}

double beta_quantile(double p, double a, double b) {
    if (!(a > 0.0) || !(b > 0.0)) throw std::invalid_argument("beta_quantile: a, b must be positive");
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("beta_quantile: p outside [0, 1]");
    if (p == 0.0) return 0.0;
    if (p == 1.0) return 1.0;

    // Newton from the mean, with bracketing bisection whenever a step
    // leaves the current bracket or the derivative underflows.
    double lo = 0.0;
    double hi = 1.0;
    double x = a / (a + b);
    const double log_norm = -log_beta(a, b);
    for (int iter = 0; iter < 200; ++iter) {
        double f = regularized_incomplete_beta(x, a, b) - p;
        if (f > 0.0) {
            hi = x;
        } else {
            lo = x;
        }
        if (std::fabs(f) < 1e-15) break;
        double log_pdf = log_norm + (a - 1.0) * std::log(x) + (b - 1.0) * std::log1p(-x);
        double step = f * std::exp(-log_pdf);
        double next = x - step;
        if (!(next > lo && next < hi) || !std::isfinite(next)) {
            next = 0.5 * (lo + hi);
        }
        if (std::fabs(next - x) < 1e-16 * (1.0 + std::fabs(x))) {
            x = next;
            break;
        }
        x = next;
    }
    return x;
}

}  // namespace introplan::stats
