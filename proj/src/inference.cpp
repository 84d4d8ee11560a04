#include "cmpmu/inference.hpp"

#include <algorithm>
#include <cmath>

#include "cmpmu/errors.hpp"
#include "cmpmu/special.hpp"

namespace cmpmu {

namespace {

void require_converged(const FittedModel& m, const char* role) {
  if (!m.converged) {
    throw Error(std::string("inference: the ") + role +
                " model did not converge");
  }
}

}  // namespace

TestResult wald_test(const FittedModel& model, const Hypothesis& h) {
  require_converged(model, "tested");
  const Eigen::Index q = model.beta.size();
  const Eigen::Index r = h.constraint_matrix.rows();
  if (r < 1 || h.constraint_matrix.cols() != q || h.rhs.size() != r) {
    throw LengthMismatch(
        "wald_test: constraint matrix must be r x q with a length-r rhs");
  }
  if (r > q || Eigen::ColPivHouseholderQR<Eigen::MatrixXd>(h.constraint_matrix)
                       .rank() < r) {
    throw Error("wald_test: constraint matrix must have full row rank");
  }

  const Eigen::VectorXd d = h.constraint_matrix * model.beta - h.rhs;
  const Eigen::MatrixXd cov =
      h.constraint_matrix * model.cov_beta * h.constraint_matrix.transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  if (!(lo > 0.0) || hi / lo > 1e12) {
    throw SingularConstraintCov(
        "wald_test: constraint covariance is numerically singular");
  }
  const Eigen::MatrixXd inv = es.eigenvectors() *
                              es.eigenvalues().cwiseInverse().asDiagonal() *
                              es.eigenvectors().transpose();
  TestResult t;
  t.method = TestMethod::Wald;
  t.statistic = std::max(0.0, d.dot(inv * d));
  t.df_num = static_cast<double>(r);
  t.p_chi2 = special::chi2_sf(t.statistic, static_cast<double>(r));
  return t;
}

TestResult lrt_composite(const FittedModel& full, const FittedModel& restricted,
                         int r, bool f_calibrate) {
  if (r < 1) throw Error("lrt_composite: r must be a positive integer");
  require_converged(full, "full");
  require_converged(restricted, "restricted");
  if (full.n_obs != restricted.n_obs) {
    throw LengthMismatch(
        "lrt_composite: models were fitted to different sample sizes");
  }
  if (restricted.loglik > full.loglik + 1e-6) {
    throw NotNested(
        "lrt_composite: restricted log-likelihood exceeds the full model's "
        "beyond tolerance; the models are not nested");
  }

  TestResult t;
  t.method = TestMethod::Lrt;
  t.statistic = std::max(0.0, 2.0 * (full.loglik - restricted.loglik));
  t.df_num = static_cast<double>(r);
  t.p_chi2 = special::chi2_sf(t.statistic, static_cast<double>(r));
  if (f_calibrate) {
    const double q = static_cast<double>(full.beta.size());
    const double dfd = static_cast<double>(full.n_obs) - q;
    if (!(dfd > 0.0)) {
      throw Error("lrt_composite: F calibration needs n > q");
    }
    t.df_den = dfd;
    t.p_f = special::f_sf(t.statistic / static_cast<double>(r),
                          static_cast<double>(r), dfd);
  }
  return t;
}

TestResult lrt_poisson(const FittedModel& full, const FittedModel& poisson_fit) {
  require_converged(full, "full");
  require_converged(poisson_fit, "Poisson");
  if (!poisson_fit.nu_fixed || std::fabs(poisson_fit.nu - 1.0) > 1e-12) {
    throw Error("lrt_poisson: the reference fit must hold nu fixed at 1");
  }
  if (full.n_obs != poisson_fit.n_obs ||
      full.beta.size() != poisson_fit.beta.size()) {
    throw LengthMismatch(
        "lrt_poisson: the two fits must share the mean model and data");
  }
  if (poisson_fit.loglik > full.loglik + 1e-6) {
    throw NotNested(
        "lrt_poisson: Poisson log-likelihood exceeds the free-dispersion "
        "model's beyond tolerance");
  }
  TestResult t;
  t.method = TestMethod::LrtPoisson;
  t.statistic = std::max(0.0, 2.0 * (full.loglik - poisson_fit.loglik));
  t.df_num = 1.0;
  t.p_chi2 = special::chi2_sf(t.statistic, 1.0);
  return t;
}

std::vector<ComparisonRow> compare(const std::vector<FittedModel>& models) {
  if (models.empty()) throw EmptyData("compare: no models");
  std::vector<ComparisonRow> rows(models.size());
  double best = models[0].aic;
  for (std::size_t i = 0; i < models.size(); ++i) {
    rows[i].index = i;
    rows[i].loglik = models[i].loglik;
    rows[i].aic = models[i].aic;
    rows[i].n_params = models[i].n_params;
    best = std::min(best, models[i].aic);
  }
  for (ComparisonRow& r : rows) r.delta_aic = r.aic - best;
  std::stable_sort(rows.begin(), rows.end(),
                   [](const ComparisonRow& a, const ComparisonRow& b) {
                     return a.aic < b.aic;
                   });
  return rows;
}

}  // namespace cmpmu
