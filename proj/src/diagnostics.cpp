#include "cmpmu/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "cmpmu/errors.hpp"

namespace cmpmu {

namespace {

double ks_of_sorted(const std::vector<double>& u) {
  const double n = static_cast<double>(u.size());
  double d = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double hi = (static_cast<double>(i) + 1.0) / n - u[i];
    const double lo = u[i] - static_cast<double>(i) / n;
    d = std::max({d, hi, lo});
  }
  return d;
}

}  // namespace

PitSample pit(const Eigen::VectorXd& mu, const Eigen::VectorXd& nu,
              const std::vector<std::int64_t>& y, std::uint64_t seed,
              const SeriesControl& series) {
  const std::size_t n = y.size();
  if (static_cast<std::size_t>(mu.size()) != n ||
      static_cast<std::size_t>(nu.size()) != n) {
    throw LengthMismatch("pit: mu, nu, and y must have equal lengths");
  }
  if (n == 0) throw EmptyData("pit: no observations");

  std::mt19937_64 rng(seed);
  PitSample out;
  out.seed = seed;
  out.values.resize(n);

  // consecutive observations often share (mu, nu); reuse the solve
  CmpParams p{};
  bool have = false;
  for (std::size_t i = 0; i < n; ++i) {
    if (!have || mu[i] != p.mu || nu[i] != p.nu) {
      p = make_params(mu[i], nu[i], 1e-12, series);
      have = true;
    }
    const double v = uniform01(rng);
    const double u = cdf(y[i] - 1, p) + v * pmf(y[i], p);
    out.values[i] = std::clamp(u, 0.0, 1.0);
  }
  std::sort(out.values.begin(), out.values.end());
  out.ks_statistic = ks_of_sorted(out.values);
  return out;
}

PitSample pit(const FittedModel& model, const std::vector<std::int64_t>& y,
              std::uint64_t seed) {
  if (model.n_obs != y.size()) {
    throw LengthMismatch("pit: model was fitted to a different sample size");
  }
  return pit(model.per_obs_mu, model.per_obs_nu, y, seed);
}

std::vector<std::pair<double, double>> pit_quantile_table(const PitSample& p,
                                                          int grid) {
  if (grid < 2) throw Error("pit_quantile_table: grid must be >= 2");
  const std::size_t n = p.values.size();
  if (n == 0) throw EmptyData("pit_quantile_table: empty PIT sample");
  std::vector<std::pair<double, double>> out;
  out.reserve(grid);
  const double dn = static_cast<double>(n);
  for (int j = 0; j < grid; ++j) {
    const double prob = (static_cast<double>(j) + 0.5) / grid;
    // invert the plotting positions (i - 0.5)/n by linear interpolation
    const double t = prob * dn - 0.5;
    double q;
    if (t <= 0.0) {
      q = p.values.front();
    } else if (t >= dn - 1.0) {
      q = p.values.back();
    } else {
      const std::size_t lo = static_cast<std::size_t>(std::floor(t));
      const double w = t - static_cast<double>(lo);
      q = (1.0 - w) * p.values[lo] + w * p.values[lo + 1];
    }
    out.emplace_back(prob, q);
  }
  return out;
}

std::vector<std::int64_t> pit_histogram(const PitSample& p, int bins) {
  if (bins < 1) throw Error("pit_histogram: bins must be >= 1");
  std::vector<std::int64_t> counts(bins, 0);
  for (double u : p.values) {
    const int b = std::min(bins - 1, static_cast<int>(u * bins));
    ++counts[b];
  }
  return counts;
}

double ks_critical(std::size_t n, double level) {
  if (n == 0) throw Error("ks_critical: n must be positive");
  const double root = std::sqrt(static_cast<double>(n));
  if (level == 0.05) return 1.358 / root;
  if (level == 0.01) return 1.628 / root;
  throw Error("ks_critical: tabulated levels are 0.05 and 0.01");
}

}  // namespace cmpmu
