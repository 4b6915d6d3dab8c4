#pragma once

#include <cstddef>
#include <string>
#include <vector>

// Independent test oracles. These deliberately avoid the library's own
// numerical routes: the Beta CDF here is composite-Simpson quadrature of the
// density (the library uses a continued fraction), and its inverse is plain
// bisection (the library uses Newton). The quantile oracle is a literal
// sort-and-index.
namespace oracles {

// Beta(a, b) CDF at x by adaptive composite Simpson on the log-density.
double beta_cdf_quadrature(double x, double a, double b);

// Inverse Beta CDF by bisection on beta_cdf_quadrature, to ~1e-10 in x.
double beta_inverse_bisection(double p, double a, double b);

// The split-conformal quantile, written as literally as possible:
// sort ascending, take the ceil((N+1)(1-eps))-th smallest (1-indexed),
// 1.0 when the index exceeds N.
double quantile_sort_and_index(std::vector<double> scores, double epsilon_hat);

// Full-sort retrieval oracle: indices of the `m` highest similarities,
// descending, ties by lower index first.
std::vector<std::size_t> top_m_by_similarity(const std::vector<double>& similarities,
                                             std::size_t m);

// Largest epsilon on the 1e-4 grid with l >= 1 whose Beta bound (computed by
// this oracle) meets the target; negative when no grid point qualifies.
double choose_epsilon_grid_scan(double target_success, int n, double delta);

}  // namespace oracles
