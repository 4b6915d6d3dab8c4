#include "support/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace oracles {

namespace {

double log_beta(double a, double b) {
    return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

// Simpson's rule on the Beta density under the substitution t = sin^2(theta):
// the integrand becomes 2 sin^(2a-1) cos^(2b-1) / B(a, b), which is bounded
// for a, b >= 1/2 (every shape this suite needs), so plain composite Simpson
// converges cleanly even where the raw density diverges at the endpoints.
double simpson_segment(double theta_hi, double a, double b, int panels) {
    const double log_norm = std::log(2.0) - log_beta(a, b);
    const double pa = 2.0 * a - 1.0;
    const double pb = 2.0 * b - 1.0;
    auto integrand = [&](double theta) {
        double s = std::sin(theta);
        double c = std::cos(theta);
        double log_value = log_norm;
        if (pa != 0.0) {
            if (s <= 0.0) return 0.0;
            log_value += pa * std::log(s);
        }
        if (pb != 0.0) {
            if (c <= 0.0) return 0.0;
            log_value += pb * std::log(c);
        }
        return std::exp(log_value);
    };
    const double h = theta_hi / (2.0 * panels);
    double sum = integrand(0.0) + integrand(theta_hi);
    for (int i = 1; i < 2 * panels; ++i) {
        sum += integrand(i * h) * (i % 2 == 1 ? 4.0 : 2.0);
    }
    return sum * h / 3.0;
}

}  // namespace

double beta_cdf_quadrature(double x, double a, double b) {
    if (!(a > 0.0) || !(b > 0.0)) throw std::invalid_argument("beta_cdf_quadrature: bad shape");
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double theta_hi = std::asin(std::sqrt(x));
    // Double the panel count until two refinements agree.
    double prev = simpson_segment(theta_hi, a, b, 512);
    for (int panels = 1024; panels <= 32768; panels *= 2) {
        double cur = simpson_segment(theta_hi, a, b, panels);
        if (std::fabs(cur - prev) < 1e-10) return std::clamp(cur, 0.0, 1.0);
        prev = cur;
    }
    return std::clamp(prev, 0.0, 1.0);
}

double beta_inverse_bisection(double p, double a, double b) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("beta_inverse_bisection: bad p");
    if (p == 0.0) return 0.0;
    if (p == 1.0) return 1.0;
    double lo = 0.0;
    double hi = 1.0;
    for (int i = 0; i < 46; ++i) {  // 2^-46 < 2e-14 in x
        double mid = 0.5 * (lo + hi);
        if (beta_cdf_quadrature(mid, a, b) < p) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

double quantile_sort_and_index(std::vector<double> scores, double epsilon_hat) {
    if (scores.empty()) throw std::invalid_argument("quantile oracle: empty scores");
    std::sort(scores.begin(), scores.end());
    const double n = static_cast<double>(scores.size());
    long k = static_cast<long>(std::ceil((n + 1.0) * (1.0 - epsilon_hat) - 1e-9));
    if (k > static_cast<long>(scores.size())) return 1.0;
    if (k < 1) k = 1;
    return scores[static_cast<std::size_t>(k - 1)];
}

std::vector<std::size_t> top_m_by_similarity(const std::vector<double>& similarities,
                                             std::size_t m) {
    std::vector<std::size_t> order(similarities.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (similarities[a] != similarities[b]) return similarities[a] > similarities[b];
        return a < b;
    });
    order.resize(std::min(m, order.size()));
    return order;
}

double choose_epsilon_grid_scan(double target_success, int n, double delta) {
    // The bound depends on epsilon only through l = floor((n+1)eps), and it
    // is non-increasing in l, so find the largest feasible l by walking up.
    long l_star = 0;
    for (long l = 1; l <= n; ++l) {
        double bound = beta_inverse_bisection(delta, static_cast<double>(n + 1 - l),
                                              static_cast<double>(l));
        if (bound < target_success) break;
        l_star = l;
    }
    if (l_star == 0) return -1.0;
    // Largest grid point whose l stays feasible.
    for (int i = 9999; i >= 1; --i) {
        double eps = i * 1e-4;
        long l = static_cast<long>(std::floor((n + 1) * eps + 1e-9));
        if (l >= 1 && l <= l_star) return eps;
    }
    return -1.0;
}

}  // namespace oracles
