#pragma once

// Mean-parametrized Conway-Maxwell-Poisson distribution CMP_mu(mu, nu):
//
//   P(Y = y) = lambda^y / (y!)^nu / Z(lambda, nu),
//   Z(lambda, nu) = sum_{y>=0} lambda^y / (y!)^nu,
//
// where the rate lambda is defined implicitly by E[Y] = mu.  nu < 1 gives
// overdispersion, nu = 1 the Poisson(mu), nu > 1 underdispersion; nu = 0 is
// Geometric with success probability 1/(mu+1) (rate lambda = mu/(mu+1)), and
// nu -> infinity approaches Bernoulli(mu) for mu <= 1.
//
// Everything is computed by truncated log-space series with an explicit tail
// bound, so quantities stay finite-precision-accurate across the parameter
// range without overflow.

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

namespace cmpmu {

// Controls for the truncated series sums behind every distribution quantity.
// Summation stops once the terms are decaying and a geometric bound on the
// remaining tail falls below tail_tol times the partial sum; exceeding
// max_terms throws TruncationLimit.
struct SeriesControl {
  double tail_tol = 1e-12;
  std::int64_t max_terms = 1'000'000;
};

// log(y!), cached for small y, lgamma beyond the cache.
double log_factorial(std::int64_t y);

struct LogNormalizerResult {
  double log_z;
  std::int64_t truncation;  // largest y included in the summation window
};

// log Z(lambda, nu) from log lambda.  nu = 0 requires lambda < 1 (otherwise
// the geometric series diverges).
LogNormalizerResult log_normalizer(double log_lambda, double nu,
                                   const SeriesControl& ctl = {});

// E[Y] implied by a rate.
double mean_from_rate(double log_lambda, double nu,
                      const SeriesControl& ctl = {});

// Solved parameter bundle; downstream functions operate on the recorded
// truncation window so repeated quantities are mutually consistent.
struct CmpParams {
  double mu;
  double nu;
  double log_lambda;
  double log_z;
  std::int64_t truncation;
};

// Solve log lambda so the mean equals mu, |mean - mu| <= tol * max(1, mu).
// Safeguarded Newton on log lambda (the derivative of the mean in log lambda
// is the variance) with a geometrically grown bracket and bisection fallback.
// Closed forms: nu = 0 -> lambda = mu / (mu + 1); nu = 1 -> lambda = mu.
double solve_rate(double mu, double nu, double tol = 1e-12,
                  const SeriesControl& ctl = {});

// Full bundle for (mu, nu); mu = 0 yields the point mass at zero.  The warm
// variant seeds the solver with a caller-supplied log lambda guess.
CmpParams make_params(double mu, double nu, double tol = 1e-12,
                      const SeriesControl& ctl = {});
CmpParams make_params_warm(double mu, double nu, double warm_log_lambda,
                           double tol = 1e-12, const SeriesControl& ctl = {});

// Bundle built directly from a rate; mu is the computed mean.
CmpParams params_from_rate(double log_lambda, double nu,
                           const SeriesControl& ctl = {});

double log_pmf(std::int64_t y, const CmpParams& p);
double pmf(std::int64_t y, const CmpParams& p);

// P(Y <= y); negative y gives 0.
double cdf(std::int64_t y, const CmpParams& p);

// Smallest y with cdf(y) >= prob, for prob in [0, 1).
std::int64_t quantile(double prob, const CmpParams& p);

// E[Y^r] over the truncation window, r >= 0.
double raw_moment(int r, const CmpParams& p);

// Centered functionals used by scores and Fisher information:
//   V = Var(Y), A = Cov(Y, log Y!), B = E[log Y!], C = Var(log Y!).
struct MomentFunctionals {
  double V;
  double A;
  double B;
  double C;
};
MomentFunctionals moment_functionals(const CmpParams& p);

// Closed-form approximation E[Y] ~ lambda^(1/nu) - (nu - 1) / (2 nu), nu > 0.
// Accurate in the regime nu <= 1 or lambda > 10^nu, provided lambda^(1/nu)
// is not itself negligible.
double approx_mean(double log_lambda, double nu);

// Uniform(0,1) draw with an explicit mapping from the raw 64-bit state so
// streams are reproducible across standard libraries.
inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// iid sample of size n by inverse-cdf lookup over the truncation window.
std::vector<std::int64_t> sample(std::size_t n, const CmpParams& p,
                                 std::mt19937_64& rng);
std::vector<std::int64_t> sample(const CmpParams& p, std::size_t n,
                                 std::uint64_t seed);

}  // namespace cmpmu
