#pragma once

// Tail probabilities for the chi-square and F reference distributions, built
// on the regularized incomplete gamma and beta functions.  Hand-rolled
// (series + Lentz continued fractions) so the library has no dependency
// beyond the standard library; accuracy is pinned by tests against
// independently computed reference values.

namespace cmpmu::special {

// Regularized lower incomplete gamma P(a, x), a > 0, x >= 0.
double regularized_gamma_p(double a, double x);

// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x).
double regularized_gamma_q(double a, double x);

// Regularized incomplete beta I_x(a, b), a, b > 0, 0 <= x <= 1.
double regularized_beta(double x, double a, double b);

// P(X > x) for X ~ chi-square with df degrees of freedom (df > 0, may be
// non-integer).
double chi2_sf(double x, double df);

// P(X > x) for X ~ F(df1, df2).
double f_sf(double x, double df1, double df2);

}  // namespace cmpmu::special
