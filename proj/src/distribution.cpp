#include "cmpmu/distribution.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <utility>

#include "cmpmu/errors.hpp"

namespace cmpmu {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kPosInf = std::numeric_limits<double>::infinity();

// One pass over the series: normalizer plus first two raw moments, all in
// log space with running-max renormalization of the scaled sums.
struct SeriesScan {
  double log_z;
  std::int64_t truncation;
  double mean;
  double m2;
};

SeriesScan scan_series(double log_lambda, double nu, const SeriesControl& ctl) {
  if (std::isnan(log_lambda) || std::isnan(nu) || nu < 0.0 ||
      !std::isfinite(nu)) {
    throw Error("series: nu must be finite and >= 0");
  }
  if (log_lambda == kNegInf) return {0.0, 1, 0.0, 0.0};
  if (!std::isfinite(log_lambda)) {
    throw Error("series: log_lambda must be finite or -inf");
  }
  if (nu == 0.0 && log_lambda >= 0.0) {
    throw DivergentSeries(
        "log_normalizer: series diverges for nu = 0 with lambda >= 1");
  }

  const double log_tol = std::log(ctl.tail_tol);
  double max_exp = 0.0;  // running max of the term exponents (term 0 is 1)
  double s0 = 0.0, s1 = 0.0, s2 = 0.0;
  for (std::int64_t y = 0;; ++y) {
    if (y >= ctl.max_terms) {
      throw TruncationLimit(
          "series: truncation bound not reached within max_terms");
    }
    const double yd = static_cast<double>(y);
    const double t = (y == 0) ? 0.0 : yd * log_lambda - nu * log_factorial(y);
    if (t > max_exp) {
      const double f = std::exp(max_exp - t);
      s0 *= f;
      s1 *= f;
      s2 *= f;
      max_exp = t;
    }
    const double w = std::exp(t - max_exp);
    s0 += w;
    s1 += w * yd;
    s2 += w * yd * yd;
    // Ratio of the next term to this one; once terms decay, bound the whole
    // remaining tail geometrically.  The (y+2)^2 factor keeps the first and
    // second moment tails covered by the same bound.
    const double log_r = log_lambda - nu * std::log(yd + 1.0);
    if (log_r < 0.0) {
      const double r = std::exp(log_r);
      const double log_bound =
          t + log_r - std::log1p(-r) + 2.0 * std::log(yd + 2.0);
      if (log_bound <= log_tol + max_exp + std::log(s0)) {
        return {max_exp + std::log(s0), y, s1 / s0, s2 / s0};
      }
    }
  }
}

// Safeguarded Newton on log lambda: the mean is increasing in log lambda
// with derivative Var(Y), so Newton steps are damped into a bracket that is
// grown geometrically until it encloses the root, then bisection backs up
// any step that would leave it.
std::pair<double, SeriesScan> solve_core(double mu, double nu, double tol,
                                         const SeriesControl& ctl,
                                         double warm) {
  if (std::isnan(mu) || !std::isfinite(mu) || mu < 0.0) {
    throw Error("solve_rate: mu must be finite and >= 0");
  }
  if (std::isnan(nu) || !std::isfinite(nu) || nu < 0.0) {
    throw Error("solve_rate: nu must be finite and >= 0");
  }
  if (nu > 1e3) {
    // Beyond this the distribution is numerically Bernoulli-like and the
    // solve becomes ill-conditioned.
    std::fprintf(stderr,
                 "cmpmu: warning: nu = %g clamped to 1e3 (Bernoulli regime)\n",
                 nu);
    nu = 1e3;
  }
  if (mu == 0.0) return {kNegInf, SeriesScan{0.0, 1, 0.0, 0.0}};
  if (nu == 0.0) {
    const double x = std::log(mu) - std::log1p(mu);  // lambda = mu/(mu+1)
    return {x, scan_series(x, nu, ctl)};
  }
  if (nu == 1.0) {
    const double x = std::log(mu);  // lambda = mu
    return {x, scan_series(x, nu, ctl)};
  }

  double x;
  // A warm hint is only a speedup: discard it when it implies a mean more
  // than ~64x away from the target, since scanning the series there could
  // cost far more terms than the solve itself (log lambda moves by roughly
  // nu per factor e of mean).
  if (std::isfinite(warm) &&
      std::fabs(warm - nu * std::log(std::max(mu, 1e-4))) <=
          nu * std::log(64.0)) {
    x = warm;
  } else if (nu >= 30.0 && mu < 1.0 - 1e-12) {
    x = std::log(mu) - std::log1p(-mu);  // near-Bernoulli seed
  } else {
    // Approximation-based seed, floored so the argument stays positive in
    // the nu > 1, small-mu regime where the approximation is poor.
    const double corr = (nu - 1.0) / (2.0 * nu);
    const double arg = std::max({mu + corr, mu, 1e-4});
    x = nu * std::log(arg);
  }

  const double ftol = tol * std::max(1.0, mu);
  double lo = kNegInf, hi = kPosInf;
  double grow = std::max(0.25, 0.5 * nu);
  SeriesScan scan{};
  double resid = kPosInf;
  for (int iter = 0; iter < 300; ++iter) {
    scan = scan_series(x, nu, ctl);
    const double f = scan.mean - mu;
    resid = std::fabs(f);
    if (resid <= ftol) return {x, scan};
    if (f < 0.0) {
      lo = std::max(lo, x);
    } else {
      hi = std::min(hi, x);
    }
    double var = scan.m2 - scan.mean * scan.mean;
    if (!(var > 0.0)) var = std::numeric_limits<double>::min();
    double x_new = x - f / var;
    if (std::isfinite(lo) && std::isfinite(hi)) {
      if (!(x_new > lo && x_new < hi)) x_new = 0.5 * (lo + hi);
    } else if (!std::isfinite(x_new) || std::fabs(x_new - x) > grow) {
      x_new = x + ((f < 0.0) ? grow : -grow);
      grow *= 2.0;
    }
    x = x_new;
  }
  throw NoConvergence("solve_rate: no convergence in 300 iterations", resid);
}

}  // namespace

double log_factorial(std::int64_t y) {
  if (y < 0) throw Error("log_factorial: negative argument");
  static const std::vector<double> table = [] {
    std::vector<double> t(1 << 16);
    for (std::size_t i = 0; i < t.size(); ++i) {
      t[i] = std::lgamma(static_cast<double>(i) + 1.0);
    }
    return t;
  }();
  if (static_cast<std::uint64_t>(y) < table.size()) {
    return table[static_cast<std::size_t>(y)];
  }
  return std::lgamma(static_cast<double>(y) + 1.0);
}

LogNormalizerResult log_normalizer(double log_lambda, double nu,
                                   const SeriesControl& ctl) {
  const SeriesScan s = scan_series(log_lambda, nu, ctl);
  return {s.log_z, s.truncation};
}

double mean_from_rate(double log_lambda, double nu, const SeriesControl& ctl) {
  return scan_series(log_lambda, nu, ctl).mean;
}

double solve_rate(double mu, double nu, double tol, const SeriesControl& ctl) {
  return solve_core(mu, nu, tol, ctl, std::numeric_limits<double>::quiet_NaN())
      .first;
}

CmpParams make_params(double mu, double nu, double tol,
                      const SeriesControl& ctl) {
  return make_params_warm(mu, nu, std::numeric_limits<double>::quiet_NaN(),
                          tol, ctl);
}

CmpParams make_params_warm(double mu, double nu, double warm_log_lambda,
                           double tol, const SeriesControl& ctl) {
  const auto [x, scan] = solve_core(mu, nu, tol, ctl, warm_log_lambda);
  return {mu, nu, x, scan.log_z, scan.truncation};
}

CmpParams params_from_rate(double log_lambda, double nu,
                           const SeriesControl& ctl) {
  const SeriesScan s = scan_series(log_lambda, nu, ctl);
  return {s.mean, nu, log_lambda, s.log_z, s.truncation};
}

double log_pmf(std::int64_t y, const CmpParams& p) {
  if (y < 0) return kNegInf;
  const double a =
      (y == 0) ? 0.0 : static_cast<double>(y) * p.log_lambda;
  return a - p.nu * log_factorial(y) - p.log_z;
}

double pmf(std::int64_t y, const CmpParams& p) { return std::exp(log_pmf(y, p)); }

double cdf(std::int64_t y, const CmpParams& p) {
  if (y < 0) return 0.0;
  const std::int64_t top = std::min(y, p.truncation);
  double s = 0.0;
  for (std::int64_t k = 0; k <= top; ++k) s += pmf(k, p);
  return std::min(s, 1.0);
}

std::int64_t quantile(double prob, const CmpParams& p) {
  if (std::isnan(prob) || prob < 0.0 || prob >= 1.0) {
    throw Error("quantile: prob must be in [0, 1)");
  }
  double c = 0.0;
  for (std::int64_t y = 0; y <= p.truncation; ++y) {
    c += pmf(y, p);
    if (c >= prob) return y;
  }
  return p.truncation;  // prob falls inside the truncated tail mass
}

double raw_moment(int r, const CmpParams& p) {
  if (r < 0) throw Error("raw_moment: order must be >= 0");
  if (r == 0) return 1.0;
  double s = 0.0, mass = 0.0;
  for (std::int64_t y = 0; y <= p.truncation; ++y) {
    const double w = pmf(y, p);
    mass += w;
    s += w * std::pow(static_cast<double>(y), r);
  }
  return s / mass;
}

MomentFunctionals moment_functionals(const CmpParams& p) {
  const std::int64_t top = p.truncation;
  std::vector<double> w(top + 1), lf(top + 1);
  double mass = 0.0;
  for (std::int64_t y = 0; y <= top; ++y) {
    w[y] = pmf(y, p);
    lf[y] = log_factorial(y);
    mass += w[y];
  }
  double m1 = 0.0, b = 0.0;
  for (std::int64_t y = 0; y <= top; ++y) {
    m1 += w[y] * static_cast<double>(y);
    b += w[y] * lf[y];
  }
  m1 /= mass;
  b /= mass;
  // Centered second pass so V*C - A^2 >= 0 holds numerically (it is a
  // covariance matrix determinant).
  double v = 0.0, a = 0.0, c = 0.0;
  for (std::int64_t y = 0; y <= top; ++y) {
    const double dy = static_cast<double>(y) - m1;
    const double dl = lf[y] - b;
    v += w[y] * dy * dy;
    a += w[y] * dy * dl;
    c += w[y] * dl * dl;
  }
  return {v / mass, a / mass, b, c / mass};
}

double approx_mean(double log_lambda, double nu) {
  if (std::isnan(nu) || nu <= 0.0) {
    throw Error("approx_mean: nu must be > 0");
  }
  return std::exp(log_lambda / nu) - (nu - 1.0) / (2.0 * nu);
}

std::vector<std::int64_t> sample(std::size_t n, const CmpParams& p,
                                 std::mt19937_64& rng) {
  std::vector<double> cum(p.truncation + 1);
  double c = 0.0;
  for (std::int64_t y = 0; y <= p.truncation; ++y) {
    c += pmf(y, p);
    cum[y] = c;
  }
  std::vector<std::int64_t> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = uniform01(rng);
    const auto it = std::lower_bound(cum.begin(), cum.end(), u);
    out[i] = (it == cum.end()) ? p.truncation : (it - cum.begin());
  }
  return out;
}

std::vector<std::int64_t> sample(const CmpParams& p, std::size_t n,
                                 std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return sample(n, p, rng);
}

}  // namespace cmpmu
