#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "cmpmu/dataset.hpp"
#include "cmpmu/distribution.hpp"
#include "cmpmu/model.hpp"

namespace cmpmu {

struct FitControl {
  double grad_tol = 1e-8;     // joint score infinity-norm at convergence
  double loglik_tol = 1e-10;  // relative log-likelihood change at convergence
  int max_outer = 100;
  double rate_tol = 1e-12;  // per-observation rate solve tolerance
  SeriesControl series{};
  double mean_cap = 1e6;  // MeanOverflow guard on fitted means
  int max_halvings = 40;
  double nu_min = 1e-6;
  double nu_max = 1e3;
};

// Numeric fitting problem: mean design X (n x q), counts y, per-observation
// additive offset on the linear predictor (log exposure for the log link),
// and an optional dispersion design X_disp (n x q~) giving nu = exp(x~'
// gamma); zero columns means constant nu.
struct GlmProblem {
  Eigen::MatrixXd X;
  std::vector<std::int64_t> y;
  Eigen::VectorXd offset_log;
  Link link = Link::Log;
  std::vector<std::string> beta_labels;
  Eigen::MatrixXd X_disp;
  std::vector<std::string> gamma_labels;
  std::optional<double> fixed_nu;

  bool has_disp_design() const { return X_disp.cols() > 0; }
};

// A parameter point for the problem: beta always; nu when there is no
// dispersion design, gamma when there is.
struct GlmState {
  Eigen::VectorXd beta;
  double nu = 1.0;
  Eigen::VectorXd gamma;
};

struct FittedModel {
  std::vector<std::string> beta_labels;
  Eigen::VectorXd beta;
  bool has_gamma = false;
  std::vector<std::string> gamma_labels;
  Eigen::VectorXd gamma;
  double nu = 1.0;  // constant dispersion estimate (or fixed value)
  bool nu_fixed = false;

  double loglik = 0.0;
  double aic = 0.0;
  int n_params = 0;  // estimated parameters: q + (0 | 1 | q~)

  Eigen::MatrixXd cov_beta;  // plug-in [sum mu'(eta)^2 x x' / V]^-1
  Eigen::VectorXd se_beta;
  Eigen::MatrixXd cov_disp;  // 1x1 for constant nu; 0x0 when fixed
  Eigen::VectorXd se_disp;

  bool converged = false;
  int iterations = 0;
  double score_norm = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> loglik_trace;  // accepted outer-iteration values

  Link link = Link::Log;
  std::size_t n_obs = 0;
  Eigen::VectorXd eta;
  Eigen::VectorXd per_obs_mu;
  Eigen::VectorXd per_obs_nu;
  std::vector<double> per_obs_log_lambda;
};

// iid fit: mu = sample mean exactly; nu from the moment-matching equation
// mean(log y!) = B(mu, nu) by safeguarded root finding on log nu.
struct IidFit {
  double mu = 0.0;
  double nu = 1.0;
  double se_mu = std::numeric_limits<double>::quiet_NaN();
  double se_nu = std::numeric_limits<double>::quiet_NaN();
  double loglik = 0.0;
  double aic = 0.0;
  std::size_t n = 0;
  bool converged = false;
  bool degenerate = false;  // all counts equal: nu unidentified (+inf)
  double score_residual = 0.0;
};

// Resolve a ModelSpec against a dataset: builds designs over complete rows
// (incomplete rows dropped with a stderr note), validates the response and
// offset columns.
GlmProblem build_problem(const ModelSpec& spec, const Dataset& ds);

FittedModel fit_glm(const GlmProblem& pb, const FitControl& ctl = {});
FittedModel fit_glm(const ModelSpec& spec, const Dataset& ds,
                    const FitControl& ctl = {});

IidFit fit_iid(const std::vector<std::int64_t>& y, const FitControl& ctl = {});

// Exposed for testing: exact log-likelihood, analytic score (stacked beta
// block then dispersion block), and plug-in information blocks averaged over
// observations ((1/n)-scaled; invert n*block for covariances).
double glm_loglik(const GlmProblem& pb, const GlmState& st,
                  const FitControl& ctl = {});
Eigen::VectorXd score_vector(const GlmProblem& pb, const GlmState& st,
                             const FitControl& ctl = {});
struct FisherBlocks {
  Eigen::MatrixXd beta_block;
  Eigen::MatrixXd disp_block;  // 1x1 (constant nu) or q~ x q~ (gamma)
};
FisherBlocks fisher_blocks(const GlmProblem& pb, const GlmState& st,
                           const FitControl& ctl = {});

// Per-observation dispersion implied by a state.
Eigen::VectorXd per_obs_nu(const GlmProblem& pb, const GlmState& st);

}  // namespace cmpmu
