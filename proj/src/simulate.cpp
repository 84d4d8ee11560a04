#include "cmpmu/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>

#include "cmpmu/design.hpp"
#include "cmpmu/errors.hpp"
#include "cmpmu/formula.hpp"
#include "cmpmu/inference.hpp"

namespace cmpmu {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& v, const std::string& key,
                    std::size_t line) {
  const char* p = v.c_str();
  char* end = nullptr;
  const double x = std::strtod(p, &end);
  if (end == p || *end != '\0' || !std::isfinite(x)) {
    throw ParseError("config: bad numeric value for '" + key + "'", line);
  }
  return x;
}

std::uint64_t parse_uint(const std::string& v, const std::string& key,
                         std::size_t line) {
  const char* p = v.c_str();
  char* end = nullptr;
  const unsigned long long x = std::strtoull(p, &end, 10);
  if (end == p || *end != '\0' || v.find('-') != std::string::npos) {
    throw ParseError("config: bad integer value for '" + key + "'", line);
  }
  return static_cast<std::uint64_t>(x);
}

}  // namespace

StudyConfig parse_study_config(std::istream& in) {
  StudyConfig cfg;
  bool saw_cov = false, saw_terms = false, saw_test = false, saw_n = false,
       saw_reps = false;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ParseError("config: expected key=value", lineno);
    }
    const std::string key = trim(t.substr(0, eq));
    const std::string val = trim(t.substr(eq + 1));
    if (key == "covariates") {
      cfg.covariates_path = val;
      saw_cov = true;
    } else if (key == "terms") {
      cfg.terms = val;
      saw_terms = true;
    } else if (key == "link") {
      if (val == "log") {
        cfg.link = Link::Log;
      } else if (val == "identity") {
        cfg.link = Link::Identity;
      } else {
        throw ParseError("config: link must be log or identity", lineno);
      }
    } else if (key == "family") {
      if (val != "cmp_mu" && val != "poisson") {
        throw ParseError("config: family must be cmp_mu or poisson", lineno);
      }
      cfg.family = val;
    } else if (key == "true_nu") {
      cfg.true_nu = parse_double(val, key, lineno);
    } else if (key.rfind("beta.", 0) == 0) {
      const std::string label = key.substr(5);
      if (label.empty()) throw ParseError("config: empty beta label", lineno);
      cfg.beta[label] = parse_double(val, key, lineno);
    } else if (key == "test") {
      if (val == "poisson") {
        cfg.test_kind = StudyConfig::TestKind::Poisson;
        cfg.drop.clear();
      } else if (val.rfind("drop:", 0) == 0) {
        cfg.test_kind = StudyConfig::TestKind::DropTerms;
        cfg.drop = trim(val.substr(5));
      } else {
        throw ParseError("config: test must be 'poisson' or 'drop:<terms>'",
                         lineno);
      }
      saw_test = true;
    } else if (key == "n_per_dataset") {
      cfg.n_per_dataset = static_cast<std::size_t>(parse_uint(val, key, lineno));
      saw_n = true;
    } else if (key == "n_replicates") {
      cfg.n_replicates = static_cast<std::size_t>(parse_uint(val, key, lineno));
      saw_reps = true;
    } else if (key == "nominal_levels") {
      cfg.nominal_levels.clear();
      std::stringstream ss(val);
      std::string piece;
      while (std::getline(ss, piece, ',')) {
        const double lv = parse_double(trim(piece), key, lineno);
        if (!(lv > 0.0 && lv < 1.0)) {
          throw ParseError("config: nominal levels must be in (0,1)", lineno);
        }
        cfg.nominal_levels.push_back(lv);
      }
      if (cfg.nominal_levels.empty()) {
        throw ParseError("config: nominal_levels is empty", lineno);
      }
    } else if (key == "base_seed") {
      cfg.base_seed = parse_uint(val, key, lineno);
    } else {
      throw ParseError("config: unknown key '" + key + "'", lineno);
    }
  }
  if (!saw_cov || !saw_terms || !saw_test || !saw_n || !saw_reps) {
    throw ParseError(
        "config: covariates, terms, test, n_per_dataset, and n_replicates "
        "are required");
  }
  return cfg;
}

StudyConfig parse_study_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error("cannot open config file: " + path);
  return parse_study_config(f);
}

SimulatedData simulate_dataset(const Eigen::MatrixXd& source_X,
                               const Eigen::VectorXd& beta, double nu,
                               Link link, std::size_t n, std::uint64_t seed,
                               const SeriesControl& series) {
  const std::size_t m = static_cast<std::size_t>(source_X.rows());
  if (m == 0) throw EmptyData("simulate_dataset: no source rows");
  if (source_X.cols() != beta.size()) {
    throw LengthMismatch("simulate_dataset: beta does not match the design");
  }
  if (n == 0) throw Error("simulate_dataset: n must be positive");
  if (!(nu > 0.0) || !std::isfinite(nu)) {
    throw Error("simulate_dataset: nu must be positive and finite");
  }

  std::mt19937_64 rng(seed);
  SimulatedData out;
  out.X.resize(n, source_X.cols());
  out.y.resize(n);
  out.rows.resize(n);

  std::vector<char> have(m, 0);
  std::vector<CmpParams> cache(m);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t idx = std::min<std::size_t>(
        m - 1, static_cast<std::size_t>(uniform01(rng) * m));
    out.rows[k] = idx;
    out.X.row(k) = source_X.row(idx);
    if (!have[idx]) {
      const double eta = source_X.row(idx).dot(beta);
      const double mu = link == Link::Log ? std::exp(eta) : eta;
      if (!(mu >= 0.0) || !std::isfinite(mu)) {
        throw MeanOverflow("simulate_dataset: invalid generator mean " +
                           std::to_string(mu));
      }
      if (mu > 1e6) {
        throw MeanOverflow("simulate_dataset: generator mean " +
                           std::to_string(mu) + " exceeds 1e6");
      }
      cache[idx] = make_params(mu, nu, 1e-12, series);
      have[idx] = 1;
    }
    out.y[k] = sample(1, cache[idx], rng)[0];
  }
  return out;
}

StudyResult run_study(const StudyConfig& cfg, const FitControl& ctl) {
  const Dataset ds = load_csv(cfg.covariates_path);
  const Formula full_f = Formula::parse(cfg.terms);
  const std::vector<std::size_t> rows = complete_rows(ds, full_f.variables());
  if (rows.empty()) throw EmptyData("run_study: no complete covariate rows");
  const DesignMatrix dm = build_design(ds, full_f, rows);
  const Eigen::Index q = dm.X.cols();

  // generator coefficients, keyed by design-column label
  Eigen::VectorXd beta(q);
  for (Eigen::Index j = 0; j < q; ++j) {
    const auto it = cfg.beta.find(dm.labels[j]);
    if (it == cfg.beta.end()) {
      throw GeneratorMisspecified("run_study: no beta for design column '" +
                                  dm.labels[j] + "'");
    }
    beta[j] = it->second;
  }
  for (const auto& kv : cfg.beta) {
    if (std::find(dm.labels.begin(), dm.labels.end(), kv.first) ==
        dm.labels.end()) {
      throw GeneratorMisspecified("run_study: beta label '" + kv.first +
                                  "' matches no design column");
    }
  }

  double gen_nu = cfg.true_nu;
  if (cfg.family == "poisson") {
    if (cfg.true_nu != 1.0) {
      throw GeneratorMisspecified(
          "run_study: true_nu is fixed at 1 for the poisson family");
    }
    gen_nu = 1.0;
  } else if (cfg.family != "cmp_mu") {
    throw GeneratorMisspecified("run_study: unknown family " + cfg.family);
  }
  if (!(gen_nu > 0.0) || !std::isfinite(gen_nu)) {
    throw GeneratorMisspecified("run_study: true_nu must be positive");
  }

  if (cfg.n_per_dataset < static_cast<std::size_t>(q) + 2) {
    throw GeneratorMisspecified(
        "run_study: n_per_dataset must be at least q + 2");
  }
  if (cfg.n_replicates == 0) {
    throw GeneratorMisspecified("run_study: n_replicates must be positive");
  }
  for (double lv : cfg.nominal_levels) {
    if (!(lv > 0.0 && lv < 1.0)) {
      throw GeneratorMisspecified("run_study: nominal levels must be in (0,1)");
    }
  }

  // generator means are replicate-independent: validate them once
  for (Eigen::Index i = 0; i < dm.X.rows(); ++i) {
    const double eta = dm.X.row(i).dot(beta);
    const double mu = cfg.link == Link::Log ? std::exp(eta) : eta;
    if (!(mu >= 0.0) || !std::isfinite(mu) || mu > 1e6) {
      throw GeneratorMisspecified(
          "run_study: generator mean invalid on source row " +
          std::to_string(i));
    }
  }

  std::vector<std::size_t> drop_cols;
  int r = 0;
  const bool poisson_test = cfg.test_kind == StudyConfig::TestKind::Poisson;
  if (poisson_test) {
    r = 1;
  } else {
    drop_cols = columns_of_terms(dm, full_f, Formula::parse(cfg.drop));
    r = static_cast<int>(drop_cols.size());
  }

  StudyResult res;
  res.n_requested = cfg.n_replicates;
  res.df_num = r;
  res.levels.resize(cfg.nominal_levels.size());
  for (std::size_t l = 0; l < cfg.nominal_levels.size(); ++l) {
    res.levels[l].nominal = cfg.nominal_levels[l];
  }

  for (std::size_t k = 0; k < cfg.n_replicates; ++k) {
    try {
      const SimulatedData sim =
          simulate_dataset(dm.X, beta, gen_nu, cfg.link, cfg.n_per_dataset,
                           cfg.base_seed + k, ctl.series);
      GlmProblem full_pb;
      full_pb.X = sim.X;
      full_pb.y = sim.y;
      full_pb.link = cfg.link;
      const FittedModel full_m = fit_glm(full_pb, ctl);
      if (!full_m.converged) {
        ++res.n_failed;
        continue;
      }

      double p = 1.0;
      if (poisson_test) {
        GlmProblem pois_pb = full_pb;
        pois_pb.fixed_nu = 1.0;
        const FittedModel pois_m = fit_glm(pois_pb, ctl);
        if (!pois_m.converged) {
          ++res.n_failed;
          continue;
        }
        p = lrt_poisson(full_m, pois_m).p_chi2;
      } else if (r > 0) {
        GlmProblem rest_pb;
        std::vector<std::size_t> keep;
        for (Eigen::Index j = 0; j < q; ++j) {
          if (!std::binary_search(drop_cols.begin(), drop_cols.end(),
                                  static_cast<std::size_t>(j))) {
            keep.push_back(static_cast<std::size_t>(j));
          }
        }
        rest_pb.X.resize(sim.X.rows(), static_cast<Eigen::Index>(keep.size()));
        for (std::size_t j = 0; j < keep.size(); ++j) {
          rest_pb.X.col(static_cast<Eigen::Index>(j)) =
              sim.X.col(static_cast<Eigen::Index>(keep[j]));
        }
        rest_pb.y = sim.y;
        rest_pb.link = cfg.link;
        const FittedModel rest_m = fit_glm(rest_pb, ctl);
        if (!rest_m.converged) {
          ++res.n_failed;
          continue;
        }
        p = lrt_composite(full_m, rest_m, r, /*f_calibrate=*/true).p_f;
      }
      // r == 0: restricted equals full, the test never rejects (p stays 1)

      ++res.n_effective;
      for (std::size_t l = 0; l < res.levels.size(); ++l) {
        if (p < res.levels[l].nominal) ++res.levels[l].n_reject;
      }
    } catch (const Error&) {
      ++res.n_failed;
    }
  }

  if (res.n_effective == 0) {
    throw NoConvergence("run_study: every replicate failed to fit", 0.0);
  }
  const double ne = static_cast<double>(res.n_effective);
  for (LevelRate& lr : res.levels) {
    lr.rate = static_cast<double>(lr.n_reject) / ne;
    lr.std_error = std::sqrt(lr.rate * (1.0 - lr.rate) / ne);
  }
  return res;
}

}  // namespace cmpmu
