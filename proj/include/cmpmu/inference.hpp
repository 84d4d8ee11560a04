#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <limits>
#include <vector>

#include "cmpmu/fit.hpp"

namespace cmpmu {

// Linear constraint M beta = delta on the mean-model coefficients.
struct Hypothesis {
  Eigen::MatrixXd constraint_matrix;  // r x q, full row rank
  Eigen::VectorXd rhs;                // length r
};

enum class TestMethod { Wald, Lrt, LrtPoisson };

struct TestResult {
  TestMethod method = TestMethod::Wald;
  double statistic = 0.0;
  double df_num = 0.0;
  // Denominator df (n - q); NaN unless the F calibration was requested.
  double df_den = std::numeric_limits<double>::quiet_NaN();
  double p_chi2 = 1.0;
  // F-calibrated p value; NaN unless requested.
  double p_f = std::numeric_limits<double>::quiet_NaN();
};

// Quadratic-form Wald test of M beta = delta against chi^2_r.
// Requires a converged model; throws SingularConstraintCov when the
// constraint covariance M cov(beta) M^T cannot be inverted stably.
TestResult wald_test(const FittedModel& model, const Hypothesis& h);

// Likelihood-ratio test of a nested pair: statistic 2(ll_full - ll_restr)
// against chi^2_r, optionally recalibrated as statistic/r ~ F_{r, n-q}
// with q the number of mean-model coefficients in the full model.
TestResult lrt_composite(const FittedModel& full, const FittedModel& restricted,
                         int r, bool f_calibrate);

// Poisson-adequacy test of nu = 1: the full free-dispersion fit against the
// same mean model fitted with fixed_nu = 1, statistic against chi^2_1.
TestResult lrt_poisson(const FittedModel& full, const FittedModel& poisson_fit);

struct ComparisonRow {
  std::size_t index = 0;  // position of the model in the input list
  double loglik = 0.0;
  double aic = 0.0;
  int n_params = 0;
  double delta_aic = 0.0;  // aic minus the best (smallest) aic
};

// AIC comparison table, sorted by AIC ascending.
std::vector<ComparisonRow> compare(const std::vector<FittedModel>& models);

}  // namespace cmpmu
