#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <utility>
#include <vector>

#include "cmpmu/distribution.hpp"
#include "cmpmu/fit.hpp"

namespace cmpmu {

// Randomized probability integral transform of a count sample.  Under the
// true model the values are exactly uniform(0,1).
struct PitSample {
  std::vector<double> values;  // sorted ascending
  std::uint64_t seed = 0;
  // sup distance between the empirical CDF of values and the uniform CDF
  double ks_statistic = 0.0;
};

// u_i = F(y_i - 1 | mu_i, nu_i) + v_i * p(y_i | mu_i, nu_i), with v_i an
// iid uniform(0,1) stream seeded deterministically (F(-1) := 0).  The v_i
// are drawn in observation order, one per observation.
PitSample pit(const Eigen::VectorXd& mu, const Eigen::VectorXd& nu,
              const std::vector<std::int64_t>& y, std::uint64_t seed,
              const SeriesControl& series = {});

// PIT of the data under a fitted model's per-observation (mu_i, nu_i).
PitSample pit(const FittedModel& model, const std::vector<std::int64_t>& y,
              std::uint64_t seed);

// (uniform_quantile, pit_quantile) pairs at `grid` equispaced probabilities
// (j - 0.5)/grid, interpolating the sorted values at plotting positions
// (i - 0.5)/n; a well-specified model tracks the diagonal.
std::vector<std::pair<double, double>> pit_quantile_table(const PitSample& p,
                                                          int grid);

// Counts over `bins` equal-width bins on [0,1]; sums to n.
std::vector<std::int64_t> pit_histogram(const PitSample& p, int bins);

// Large-sample Kolmogorov-Smirnov critical value at level 0.05 or 0.01.
double ks_critical(std::size_t n, double level);

}  // namespace cmpmu
