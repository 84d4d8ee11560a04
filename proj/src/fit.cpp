#include "cmpmu/fit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <utility>

#include "cmpmu/design.hpp"
#include "cmpmu/errors.hpp"
#include "cmpmu/formula.hpp"

namespace cmpmu {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double inv_link(Link link, double eta) {
  return link == Link::Log ? std::exp(eta) : eta;
}

double dmu_deta(Link link, double mu) {
  return link == Link::Log ? mu : 1.0;
}

struct ObsSolve {
  double log_lambda = kNaN;
  double log_z = kNaN;
  std::int64_t trunc = 0;
};

// One full evaluation of (beta, dispersion) over all observations: feasible
// means, per-observation rate solves, exact log-likelihood.
struct Eval {
  bool feasible = false;
  std::string reason;
  double loglik = kNegInf;
  Eigen::VectorXd eta, mu, nu;
  std::vector<ObsSolve> sol;
};

Eval evaluate(const GlmProblem& pb, const Eigen::VectorXd& beta, double nu_c,
              const Eigen::VectorXd& gamma, const std::vector<double>& warm,
              const FitControl& ctl, bool strict) {
  const std::size_t n = pb.y.size();
  Eval e;
  e.eta = pb.X * beta;
  if (pb.offset_log.size() > 0) e.eta += pb.offset_log;
  e.mu.resize(n);
  if (pb.has_disp_design()) {
    e.nu = (pb.X_disp * gamma).array().exp();
  } else {
    e.nu = Eigen::VectorXd::Constant(n, nu_c);
  }
  e.sol.resize(n);
  double ll = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double mu = inv_link(pb.link, e.eta[i]);
    e.mu[i] = mu;
    if (std::isnan(mu) || mu < 0.0 ||
        (pb.link == Link::Identity && mu <= 0.0)) {
      e.reason = "nonpositive fitted mean under the identity link";
      if (strict) throw Error("fit_glm: " + e.reason);
      return e;
    }
    if (mu > ctl.mean_cap) {
      e.reason = "fitted mean exceeds cap";
      if (strict) {
        throw MeanOverflow("fit_glm: fitted mean " + std::to_string(mu) +
                           " exceeds cap " + std::to_string(ctl.mean_cap) +
                           " (separation-like divergence)");
      }
      return e;
    }
    const double nui = e.nu[i];
    if (!(nui >= ctl.nu_min && nui <= ctl.nu_max)) {
      e.reason = "dispersion outside bounds";
      if (strict) {
        throw Error("fit_glm: dispersion value " + std::to_string(nui) +
                    " outside [" + std::to_string(ctl.nu_min) + ", " +
                    std::to_string(ctl.nu_max) + "]");
      }
      return e;
    }
    CmpParams p;
    try {
      p = make_params_warm(mu, nui, warm[i], ctl.rate_tol, ctl.series);
    } catch (const Error&) {
      if (strict) throw;
      e.reason = "inner rate solve failed";
      return e;
    }
    e.sol[i] = {p.log_lambda, p.log_z, p.truncation};
    const std::int64_t yi = pb.y[i];
    const double t = (yi == 0) ? 0.0 : static_cast<double>(yi) * p.log_lambda;
    ll += t - nui * log_factorial(yi) - p.log_z;
  }
  if (std::isnan(ll)) {
    e.reason = "non-finite log-likelihood";
    if (strict) throw Error("fit_glm: " + e.reason);
    return e;
  }
  e.loglik = ll;
  e.feasible = true;
  return e;
}

std::vector<MomentFunctionals> eval_stats(const Eval& e) {
  std::vector<MomentFunctionals> out(e.sol.size());
  for (std::size_t i = 0; i < e.sol.size(); ++i) {
    const CmpParams p{e.mu[i], e.nu[i], e.sol[i].log_lambda, e.sol[i].log_z,
                      e.sol[i].trunc};
    out[i] = moment_functionals(p);
  }
  return out;
}

double snu_obs(const MomentFunctionals& m, std::int64_t y, double mu) {
  const double resid = m.V > 0.0 ? m.A * (y - mu) / m.V : 0.0;
  return resid - (log_factorial(y) - m.B);
}

struct ScoreInfo {
  Eigen::VectorXd s_beta;
  Eigen::MatrixXd info_beta;
  Eigen::VectorXd s_disp;    // empty when not requested
  Eigen::MatrixXd info_disp;
};

ScoreInfo accumulate(const GlmProblem& pb, const Eval& e,
                     const std::vector<MomentFunctionals>& stats,
                     bool want_disp) {
  const std::size_t n = pb.y.size();
  const Eigen::Index q = pb.X.cols();
  ScoreInfo si;
  si.s_beta = Eigen::VectorXd::Zero(q);
  si.info_beta = Eigen::MatrixXd::Zero(q, q);
  const bool gamma_form = pb.has_disp_design();
  const Eigen::Index qd = gamma_form ? pb.X_disp.cols() : 1;
  if (want_disp) {
    si.s_disp = Eigen::VectorXd::Zero(qd);
    si.info_disp = Eigen::MatrixXd::Zero(qd, qd);
  }
  for (std::size_t i = 0; i < n; ++i) {
    const MomentFunctionals& m = stats[i];
    const double d = dmu_deta(pb.link, e.mu[i]);
    if (m.V > 0.0) {
      const double r = (static_cast<double>(pb.y[i]) - e.mu[i]) / m.V;
      si.s_beta += (r * d) * pb.X.row(i).transpose();
      si.info_beta += (d * d / m.V) * (pb.X.row(i).transpose() * pb.X.row(i));
    }
    if (want_disp) {
      const double s = snu_obs(m, pb.y[i], e.mu[i]);
      const double w2 = m.V > 0.0 ? std::max(m.C - m.A * m.A / m.V, 0.0) : 0.0;
      if (gamma_form) {
        const double nui = e.nu[i];
        si.s_disp += (s * nui) * pb.X_disp.row(i).transpose();
        si.info_disp += (w2 * nui * nui) *
                        (pb.X_disp.row(i).transpose() * pb.X_disp.row(i));
      } else {
        si.s_disp[0] += s;
        si.info_disp(0, 0) += w2;
      }
    }
  }
  return si;
}

// Bracketed scalar root finding: geometric search from x0 (downhill
// direction first, then the other side), then the Illinois variant of
// regula falsi.  Assumes nothing about monotonicity beyond continuity.
template <class F>
bool bracket_root(F&& f, double x0, double lo, double hi, double f_tol,
                  double x_tol, double* root, double* froot) {
  x0 = std::clamp(x0, lo, hi);
  const double f0 = f(x0);
  *root = x0;
  *froot = f0;
  if (std::fabs(f0) <= f_tol) return true;
  for (int pass = 0; pass < 2; ++pass) {
    const double sign0 = (pass == 0) ? 1.0 : -1.0;
    const double dir = (f0 > 0.0 ? 1.0 : -1.0) * sign0;
    double a = x0, fa = f0, b = x0, fb = f0;
    double step = 0.25;
    bool have = false;
    for (int k = 0; k < 64; ++k) {
      const double nb = std::clamp(b + dir * step, lo, hi);
      if (nb == b) break;  // hit a bound without a sign change
      a = b;
      fa = fb;
      b = nb;
      fb = f(b);
      *root = b;
      *froot = fb;
      if (std::fabs(fb) <= f_tol) return true;
      if ((fa > 0.0) != (fb > 0.0)) {
        have = true;
        break;
      }
      step *= 2.0;
    }
    if (!have) continue;
    for (int it = 0; it < 100; ++it) {
      double x = b - fb * (b - a) / (fb - fa);
      if (!std::isfinite(x) || x <= std::min(a, b) || x >= std::max(a, b)) {
        x = 0.5 * (a + b);
      }
      const double fx = f(x);
      *root = x;
      *froot = fx;
      if (std::fabs(fx) <= f_tol || std::fabs(b - a) <= x_tol) return true;
      if ((fx > 0.0) == (fb > 0.0)) {
        b = x;
        fb = fx;
        fa *= 0.5;
      } else {
        a = b;
        fa = fb;
        b = x;
        fb = fx;
      }
    }
    return true;  // iteration cap; caller inspects froot
  }
  return false;
}

// Plain Poisson starting values (the interior nu = 1 model).
Eigen::VectorXd init_beta(const GlmProblem& pb) {
  const std::size_t n = pb.y.size();
  const Eigen::Index q = pb.X.cols();
  Eigen::VectorXd z(n);
  if (pb.link == Link::Log) {
    for (std::size_t i = 0; i < n; ++i) {
      z[i] = std::log(std::max<double>(static_cast<double>(pb.y[i]), 0.5)) -
             pb.offset_log[i];
    }
    Eigen::VectorXd b = pb.X.colPivHouseholderQr().solve(z);
    for (int it = 0; it < 50; ++it) {
      const Eigen::VectorXd eta = pb.X * b + pb.offset_log;
      Eigen::MatrixXd h = Eigen::MatrixXd::Zero(q, q);
      Eigen::VectorXd g = Eigen::VectorXd::Zero(q);
      for (std::size_t i = 0; i < n; ++i) {
        const double ec = std::clamp(eta[i], -30.0, 30.0);
        const double mu = std::exp(ec);
        const double zi =
            (ec - pb.offset_log[i]) + (static_cast<double>(pb.y[i]) - mu) / mu;
        h += mu * (pb.X.row(i).transpose() * pb.X.row(i));
        g += (mu * zi) * pb.X.row(i).transpose();
      }
      const Eigen::VectorXd nb = h.ldlt().solve(g);
      const double delta = (nb - b).lpNorm<Eigen::Infinity>();
      b = nb;
      if (delta < 1e-10) break;
    }
    return b;
  }
  // identity link
  for (std::size_t i = 0; i < n; ++i) {
    z[i] = static_cast<double>(pb.y[i]) - pb.offset_log[i];
  }
  Eigen::VectorXd b = pb.X.colPivHouseholderQr().solve(z);
  if ((pb.X * b + pb.offset_log).minCoeff() <= 0.0) {
    // Project a flat positive mean onto the column space instead.
    const double m = std::max(z.mean(), 0.1);
    b = pb.X.colPivHouseholderQr().solve(Eigen::VectorXd::Constant(n, m));
  }
  for (int it = 0; it < 50; ++it) {
    const Eigen::VectorXd eta = pb.X * b + pb.offset_log;
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(q, q);
    Eigen::VectorXd g = Eigen::VectorXd::Zero(q);
    for (std::size_t i = 0; i < n; ++i) {
      const double w = 1.0 / std::max(eta[i], 1e-2);
      h += w * (pb.X.row(i).transpose() * pb.X.row(i));
      g += (w * z[i]) * pb.X.row(i).transpose();
    }
    const Eigen::VectorXd nb = h.ldlt().solve(g);
    const double delta = (nb - b).lpNorm<Eigen::Infinity>();
    b = nb;
    if (delta < 1e-10) break;
  }
  return b;
}

Eigen::MatrixXd invert_info(const Eigen::MatrixXd& info, const char* what) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(info);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  if (!(lo > 0.0) || hi / lo > 1e12) {
    throw SingularInformation(std::string("fisher information for ") + what +
                              " is numerically singular");
  }
  return es.eigenvectors() *
         es.eigenvalues().cwiseInverse().asDiagonal() *
         es.eigenvectors().transpose();
}

void validate_problem(const GlmProblem& pb) {
  const std::size_t n = pb.y.size();
  if (n == 0) throw EmptyData("fit_glm: no observations");
  if (static_cast<std::size_t>(pb.X.rows()) != n ||
      (pb.offset_log.size() != 0 &&
       static_cast<std::size_t>(pb.offset_log.size()) != n)) {
    throw LengthMismatch("fit_glm: design/offset rows do not match response");
  }
  if (pb.has_disp_design() &&
      static_cast<std::size_t>(pb.X_disp.rows()) != n) {
    throw LengthMismatch("fit_glm: dispersion design rows do not match");
  }
  for (std::int64_t v : pb.y) {
    if (v < 0) throw Error("fit_glm: negative count in response");
  }
  const Eigen::Index q = pb.X.cols();
  const Eigen::Index qd = pb.has_disp_design()
                              ? pb.X_disp.cols()
                              : (pb.fixed_nu ? Eigen::Index{0} : Eigen::Index{1});
  if (static_cast<Eigen::Index>(n) <= q + qd) {
    throw DegenerateData("fit_glm: need more observations than parameters");
  }
  if (pb.fixed_nu && !(*pb.fixed_nu > 0.0)) {
    throw Error("fit_glm: fixed_nu must be > 0");
  }
  if (pb.fixed_nu && pb.has_disp_design()) {
    throw Error("fit_glm: fixed_nu is incompatible with a dispersion design");
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(pb.X);
  if (qr.rank() < q) {
    throw RankDeficientDesign("fit_glm: mean design is rank deficient");
  }
  if (pb.has_disp_design()) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qrd(pb.X_disp);
    if (qrd.rank() < qd) {
      throw RankDeficientDesign(
          "fit_glm: dispersion design is rank deficient");
    }
  }
}

std::vector<std::string> default_labels(const char* stem, Eigen::Index q) {
  std::vector<std::string> out;
  for (Eigen::Index j = 0; j < q; ++j) {
    out.push_back(std::string(stem) + std::to_string(j));
  }
  return out;
}

}  // namespace

Eigen::VectorXd per_obs_nu(const GlmProblem& pb, const GlmState& st) {
  if (pb.has_disp_design()) return (pb.X_disp * st.gamma).array().exp();
  return Eigen::VectorXd::Constant(static_cast<Eigen::Index>(pb.y.size()),
                                   pb.fixed_nu.value_or(st.nu));
}

double glm_loglik(const GlmProblem& pb, const GlmState& st,
                  const FitControl& ctl) {
  std::vector<double> warm(pb.y.size(), kNaN);
  return evaluate(pb, st.beta, pb.fixed_nu.value_or(st.nu), st.gamma, warm,
                  ctl, true)
      .loglik;
}

Eigen::VectorXd score_vector(const GlmProblem& pb, const GlmState& st,
                             const FitControl& ctl) {
  std::vector<double> warm(pb.y.size(), kNaN);
  const Eval e = evaluate(pb, st.beta, pb.fixed_nu.value_or(st.nu), st.gamma,
                          warm, ctl, true);
  const auto stats = eval_stats(e);
  const ScoreInfo si = accumulate(pb, e, stats, !pb.fixed_nu.has_value());
  Eigen::VectorXd out(si.s_beta.size() + si.s_disp.size());
  out.head(si.s_beta.size()) = si.s_beta;
  if (si.s_disp.size() > 0) out.tail(si.s_disp.size()) = si.s_disp;
  return out;
}

FisherBlocks fisher_blocks(const GlmProblem& pb, const GlmState& st,
                           const FitControl& ctl) {
  std::vector<double> warm(pb.y.size(), kNaN);
  const Eval e = evaluate(pb, st.beta, pb.fixed_nu.value_or(st.nu), st.gamma,
                          warm, ctl, true);
  const auto stats = eval_stats(e);
  const ScoreInfo si = accumulate(pb, e, stats, true);
  const double n = static_cast<double>(pb.y.size());
  return {si.info_beta / n, si.info_disp / n};
}

FittedModel fit_glm(const GlmProblem& pb_in, const FitControl& ctl) {
  GlmProblem pb = pb_in;
  if (pb.offset_log.size() == 0) {
    pb.offset_log = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(
        pb.y.size()));
  }
  validate_problem(pb);
  const std::size_t n = pb.y.size();
  const Eigen::Index q = pb.X.cols();
  const bool gamma_form = pb.has_disp_design();
  const Eigen::Index qd = gamma_form ? pb.X_disp.cols() : 0;
  const bool fixed = pb.fixed_nu.has_value();

  Eigen::VectorXd beta = init_beta(pb);
  double nu = fixed ? *pb.fixed_nu : 1.0;
  Eigen::VectorXd gamma = Eigen::VectorXd::Zero(qd);

  std::vector<double> warm(n, kNaN);
  Eval cur = evaluate(pb, beta, nu, gamma, warm, ctl, true);
  auto sync_warm = [&]() {
    for (std::size_t i = 0; i < n; ++i) warm[i] = cur.sol[i].log_lambda;
  };
  auto adopt = [&](Eval&& e) {
    cur = std::move(e);
    sync_warm();
  };
  sync_warm();

  std::vector<double> trace{cur.loglik};
  double ll_prev = cur.loglik;
  bool converged = false;
  int iterations = 0;
  double snorm = kNaN;

  // Near the optimum a Fisher step can change the log-likelihood by less
  // than its floating-point granularity while still shrinking the score, so
  // acceptance also admits ties (within rounding) that reduce the relevant
  // score norm.
  auto tie_ok = [&](double cand_ll) {
    return cand_ll >= cur.loglik - 1e-13 * (1.0 + std::fabs(cur.loglik));
  };

  for (int it = 1; it <= ctl.max_outer; ++it) {
    iterations = it;
    bool improved = false;

    {  // beta block: Fisher scoring with step halving
      const auto stats = eval_stats(cur);
      const ScoreInfo si = accumulate(pb, cur, stats, false);
      const double cur_norm = si.s_beta.lpNorm<Eigen::Infinity>();
      auto cand_norm = [&](const Eval& e) {
        const auto s2 = eval_stats(e);
        return accumulate(pb, e, s2, false).s_beta.lpNorm<Eigen::Infinity>();
      };
      const Eigen::VectorXd dir = si.info_beta.ldlt().solve(si.s_beta);
      if (dir.allFinite() && dir.lpNorm<Eigen::Infinity>() > 0.0) {
        double t = 1.0;
        for (int h = 0; h <= ctl.max_halvings; ++h, t *= 0.5) {
          Eval cand = evaluate(pb, beta + t * dir, nu, gamma, warm, ctl, false);
          const bool take =
              cand.feasible &&
              (cand.loglik > cur.loglik ||
               (tie_ok(cand.loglik) && cand_norm(cand) < cur_norm));
          if (take) {
            beta += t * dir;
            adopt(std::move(cand));
            improved = true;
            break;
          }
        }
      }
    }

    if (!fixed && gamma_form) {  // gamma block: Fisher scoring with halving
      const auto stats = eval_stats(cur);
      const ScoreInfo si = accumulate(pb, cur, stats, true);
      const double cur_norm = si.s_disp.lpNorm<Eigen::Infinity>();
      auto cand_norm = [&](const Eval& e) {
        const auto s2 = eval_stats(e);
        return accumulate(pb, e, s2, true).s_disp.lpNorm<Eigen::Infinity>();
      };
      const Eigen::VectorXd dir = si.info_disp.ldlt().solve(si.s_disp);
      if (dir.allFinite() && dir.lpNorm<Eigen::Infinity>() > 0.0) {
        double t = 1.0;
        for (int h = 0; h <= ctl.max_halvings; ++h, t *= 0.5) {
          Eval cand =
              evaluate(pb, beta, nu, gamma + t * dir, warm, ctl, false);
          const bool take =
              cand.feasible &&
              (cand.loglik > cur.loglik ||
               (tie_ok(cand.loglik) && cand_norm(cand) < cur_norm));
          if (take) {
            gamma += t * dir;
            adopt(std::move(cand));
            improved = true;
            break;
          }
        }
      }
    } else if (!fixed) {  // constant nu: safeguarded root solve on log nu
      std::vector<double> warm2 = warm;
      auto fnu = [&](double lx) {
        const double nn = std::exp(lx);
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          const CmpParams p = make_params_warm(cur.mu[i], nn, warm2[i],
                                               ctl.rate_tol, ctl.series);
          warm2[i] = p.log_lambda;
          const MomentFunctionals m = moment_functionals(p);
          s += snu_obs(m, pb.y[i], cur.mu[i]);
        }
        return s;
      };
      const double cur_norm = std::fabs(fnu(std::log(nu)));
      double root = std::log(nu), fr = 0.0;
      const bool ok =
          bracket_root(fnu, std::log(nu), std::log(ctl.nu_min),
                       std::log(ctl.nu_max), 0.05 * ctl.grad_tol, 1e-13,
                       &root, &fr);
      const double nn = std::exp(root);
      if (ok && nn != nu) {
        Eval cand = evaluate(pb, beta, nn, gamma, warm, ctl, false);
        const bool take =
            cand.feasible &&
            (cand.loglik > cur.loglik ||
             (tie_ok(cand.loglik) && std::fabs(fr) < cur_norm));
        if (take) {
          nu = nn;
          adopt(std::move(cand));
          improved = true;
        }
      }
    }

    const auto stats = eval_stats(cur);
    const ScoreInfo si = accumulate(pb, cur, stats, !fixed);
    snorm = si.s_beta.lpNorm<Eigen::Infinity>();
    if (si.s_disp.size() > 0) {
      snorm = std::max(snorm, si.s_disp.lpNorm<Eigen::Infinity>());
    }
    const double rel =
        std::fabs(cur.loglik - ll_prev) / (1.0 + std::fabs(cur.loglik));
    trace.push_back(cur.loglik);
    if (snorm < ctl.grad_tol && rel < ctl.loglik_tol) {
      converged = true;
      break;
    }
    ll_prev = cur.loglik;
    if (!improved) break;
  }

  FittedModel m;
  m.beta_labels = pb.beta_labels.size() == static_cast<std::size_t>(q)
                      ? pb.beta_labels
                      : default_labels("b", q);
  m.beta = beta;
  m.has_gamma = gamma_form;
  if (gamma_form) {
    m.gamma_labels = pb.gamma_labels.size() == static_cast<std::size_t>(qd)
                         ? pb.gamma_labels
                         : default_labels("g", qd);
    m.gamma = gamma;
  }
  m.nu = nu;
  m.nu_fixed = fixed;
  m.loglik = cur.loglik;
  m.n_params = static_cast<int>(q + (fixed ? 0 : (gamma_form ? qd : 1)));
  m.aic = -2.0 * cur.loglik + 2.0 * m.n_params;
  m.converged = converged;
  m.iterations = iterations;
  m.score_norm = snorm;
  m.loglik_trace = std::move(trace);
  m.link = pb.link;
  m.n_obs = n;
  m.eta = cur.eta;
  m.per_obs_mu = cur.mu;
  m.per_obs_nu = cur.nu;
  m.per_obs_log_lambda.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    m.per_obs_log_lambda[i] = cur.sol[i].log_lambda;
  }

  const auto stats = eval_stats(cur);
  const ScoreInfo si = accumulate(pb, cur, stats, !fixed);
  m.cov_beta = invert_info(si.info_beta, "beta");
  m.se_beta = m.cov_beta.diagonal().cwiseSqrt();
  if (!fixed) {
    m.cov_disp = invert_info(si.info_disp, "dispersion");
    m.se_disp = m.cov_disp.diagonal().cwiseSqrt();
  }
  return m;
}

GlmProblem build_problem(const ModelSpec& spec, const Dataset& ds) {
  const Formula fm = Formula::parse(spec.mean_terms);
  Formula fd;
  if (spec.dispersion_terms) fd = Formula::parse(*spec.dispersion_terms);

  std::vector<std::string> vars{spec.response};
  for (const std::string& v : fm.variables()) vars.push_back(v);
  for (const std::string& v : fd.variables()) vars.push_back(v);
  if (spec.offset) vars.push_back(*spec.offset);

  const std::vector<std::size_t> rows = complete_rows(ds, vars);
  if (rows.empty()) throw EmptyData("no complete rows for the model");
  if (rows.size() < ds.n_rows) {
    std::fprintf(stderr, "cmpmu: note: dropped %zu incomplete row(s)\n",
                 ds.n_rows - rows.size());
  }

  GlmProblem pb;
  pb.y = extract_counts(ds, spec.response, rows);
  pb.link = spec.link;
  pb.fixed_nu = spec.fixed_nu;

  const DesignMatrix dm = build_design(ds, fm, rows);
  pb.X = dm.X;
  pb.beta_labels = dm.labels;
  if (!fd.terms.empty()) {
    const DesignMatrix dd = build_design(ds, fd, rows);
    pb.X_disp = dd.X;
    pb.gamma_labels = dd.labels;
  }

  const std::size_t n = rows.size();
  pb.offset_log = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  if (spec.offset) {
    if (spec.link == Link::Identity) {
      throw Error("offsets are supported only with the log link");
    }
    const Column& oc = ds.require(*spec.offset);
    if (!oc.numeric) throw Error("offset column must be numeric");
    for (std::size_t i = 0; i < n; ++i) {
      const double v = oc.num[rows[i]];
      if (!(v > 0.0)) throw Error("offset (exposure) values must be > 0");
      pb.offset_log[static_cast<Eigen::Index>(i)] = std::log(v);
    }
  }
  return pb;
}

FittedModel fit_glm(const ModelSpec& spec, const Dataset& ds,
                    const FitControl& ctl) {
  return fit_glm(build_problem(spec, ds), ctl);
}

IidFit fit_iid(const std::vector<std::int64_t>& y, const FitControl& ctl) {
  const std::size_t n = y.size();
  if (n < 2) throw DegenerateData("fit_iid: need at least 2 observations");
  long double sum = 0.0L;
  long double lf_sum = 0.0L;
  bool all_equal = true;
  for (std::int64_t v : y) {
    if (v < 0) throw Error("fit_iid: negative count");
    sum += v;
    lf_sum += log_factorial(v);
    all_equal = all_equal && v == y.front();
  }

  IidFit out;
  out.n = n;
  out.mu = static_cast<double>(sum / static_cast<long double>(n));
  if (all_equal) {
    // nu diverges: the fit is the point mass at the common count.
    out.degenerate = true;
    out.nu = std::numeric_limits<double>::infinity();
    out.se_mu = 0.0;
    out.se_nu = kNaN;
    out.loglik = 0.0;
    out.aic = 4.0;
    out.converged = true;
    return out;
  }

  const double target = static_cast<double>(lf_sum / static_cast<long double>(n));
  auto f = [&](double lx) {
    const CmpParams p =
        make_params(out.mu, std::exp(lx), ctl.rate_tol, ctl.series);
    return moment_functionals(p).B - target;
  };
  double root = 0.0, fr = 0.0;
  const double f_tol = ctl.grad_tol / static_cast<double>(n);
  const bool ok = bracket_root(f, 0.0, std::log(ctl.nu_min),
                               std::log(ctl.nu_max), f_tol, 1e-13, &root, &fr);
  if (!ok) {
    throw NoConvergence(
        "fit_iid: dispersion score has no root inside the nu bounds",
        static_cast<double>(n) * std::fabs(fr));
  }
  out.nu = std::exp(root);
  out.score_residual = static_cast<double>(n) * std::fabs(fr);
  out.converged = std::fabs(fr) <= f_tol * 1.0000001 ||
                  out.score_residual <= ctl.grad_tol;

  const CmpParams p = make_params(out.mu, out.nu, ctl.rate_tol, ctl.series);
  const MomentFunctionals m = moment_functionals(p);
  out.loglik = static_cast<double>(sum) * p.log_lambda -
               out.nu * static_cast<double>(lf_sum) -
               static_cast<double>(n) * p.log_z;
  out.se_mu = std::sqrt(m.V / static_cast<double>(n));
  const double w2 = m.C - m.A * m.A / m.V;
  out.se_nu =
      w2 > 0.0 ? std::sqrt(1.0 / (static_cast<double>(n) * w2)) : kNaN;
  out.aic = -2.0 * out.loglik + 4.0;
  return out;
}

}  // namespace cmpmu
