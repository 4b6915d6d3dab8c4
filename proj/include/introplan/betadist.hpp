#pragma once

namespace introplan::stats {

double log_beta(double a, double b);

// Regularized incomplete beta I_x(a, b), i.e. the Beta(a, b) CDF at x.
// Continued-fraction evaluation, accurate to ~1e-14 over (0, 1).
double regularized_incomplete_beta(double x, double a, double b);

// Quantile of Beta(a, b) at probability p: the x with I_x(a, b) = p.
// Newton iteration on the CDF with a bisection safeguard.
double beta_quantile(double p, double a, double b);

}  // namespace introplan::stats
