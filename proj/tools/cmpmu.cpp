// cmpmu: command-line interface for mean-parametrized
// Conway-Maxwell-Poisson count models.
//
// Subcommands: fit, test, pit, simulate, summarize, pmf-table.
// Machine output is JSON (lossless doubles) or TSV (6 significant digits);
// diagnostics go to stderr.  Exit codes: 0 success, 1 usage/data error,
// 2 non-convergence.
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cmpmu/dataset.hpp"
#include "cmpmu/design.hpp"
#include "cmpmu/diagnostics.hpp"
#include "cmpmu/distribution.hpp"
#include "cmpmu/errors.hpp"
#include "cmpmu/fit.hpp"
#include "cmpmu/formula.hpp"
#include "cmpmu/inference.hpp"
#include "cmpmu/model.hpp"
#include "cmpmu/simulate.hpp"
#include "cmpmu/special.hpp"
#include "json.hpp"

using nlohmann::json;

namespace {

// ---------------------------------------------------------------- helpers

std::string fmt6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

std::vector<double> split_doubles(const std::string& s, const char* what) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string piece;
  while (std::getline(ss, piece, ',')) {
    const auto b = piece.find_first_not_of(" \t");
    if (b == std::string::npos) continue;
    const auto e = piece.find_last_not_of(" \t");
    piece = piece.substr(b, e - b + 1);
    char* end = nullptr;
    const double v = std::strtod(piece.c_str(), &end);
    if (end == piece.c_str() || *end != '\0') {
      throw cmpmu::Error(std::string("bad value in --") + what + ": " + piece);
    }
    out.push_back(v);
  }
  if (out.empty()) {
    throw cmpmu::Error(std::string("--") + what + " needs at least one value");
  }
  return out;
}

// Common model flags shared by fit, test, and pit.
struct FitFlags {
  std::string data;
  std::string response;
  std::string terms;
  std::string dispersion_terms;
  std::string offset;
  std::string link = "log";
  double fixed_nu = std::numeric_limits<double>::quiet_NaN();
  std::uint64_t seed = 0;  // reserved; fitting is deterministic
};

void add_fit_flags(CLI::App* cmd, FitFlags& ff, bool with_fixed_nu = true,
                   bool with_seed = true) {
  cmd->add_option("--data", ff.data, "CSV file with the observations")
      ->required();
  cmd->add_option("--response", ff.response, "count response column")
      ->required();
  cmd->add_option("--terms", ff.terms,
                  "mean-model formula, e.g. 'x + g + x:g + x^2'")
      ->required();
  cmd->add_option("--dispersion-terms", ff.dispersion_terms,
                  "dispersion-model formula (log link on nu)");
  cmd->add_option("--offset", ff.offset, "exposure column (log link only)");
  cmd->add_option("--link", ff.link, "mean link: log or identity")
      ->check(CLI::IsMember({"log", "identity"}));
  if (with_fixed_nu) {
    cmd->add_option("--fixed-nu", ff.fixed_nu,
                    "hold the dispersion fixed at this value");
  }
  if (with_seed) {
    cmd->add_option("--seed", ff.seed,
                    "reserved for interface stability; fits are deterministic");
  }
}

cmpmu::ModelSpec to_spec(const FitFlags& ff) {
  cmpmu::ModelSpec spec;
  spec.response = ff.response;
  spec.mean_terms = ff.terms;
  spec.link = ff.link == "identity" ? cmpmu::Link::Identity : cmpmu::Link::Log;
  if (!ff.dispersion_terms.empty()) spec.dispersion_terms = ff.dispersion_terms;
  if (!ff.offset.empty()) spec.offset = ff.offset;
  if (!std::isnan(ff.fixed_nu)) spec.fixed_nu = ff.fixed_nu;
  return spec;
}

json coefficient_rows(const std::vector<std::string>& names,
                      const Eigen::VectorXd& est, const Eigen::VectorXd& se) {
  json rows = json::array();
  for (Eigen::Index j = 0; j < est.size(); ++j) {
    const double t = est[j] / se[j];
    rows.push_back({{"name", names[static_cast<std::size_t>(j)]},
                    {"estimate", est[j]},
                    {"se", se[j]},
                    {"t", t},
                    {"p", cmpmu::special::chi2_sf(t * t, 1.0)}});
  }
  return rows;
}

json fit_report(const cmpmu::FittedModel& m, const FitFlags& ff) {
  json out;
  out["model"] = {{"response", ff.response},
                  {"terms", ff.terms},
                  {"link", ff.link},
                  {"dispersion_terms", ff.dispersion_terms.empty()
                                           ? json(nullptr)
                                           : json(ff.dispersion_terms)},
                  {"offset",
                   ff.offset.empty() ? json(nullptr) : json(ff.offset)}};
  out["n"] = m.n_obs;
  out["coefficients"] = coefficient_rows(m.beta_labels, m.beta, m.se_beta);
  if (m.nu_fixed) {
    out["dispersion"] = {{"kind", "fixed"}, {"nu", m.nu}};
  } else if (m.has_gamma) {
    out["dispersion"] = {
        {"kind", "regression"},
        {"coefficients", coefficient_rows(m.gamma_labels, m.gamma, m.se_disp)}};
  } else {
    out["dispersion"] = {
        {"kind", "constant"}, {"nu", m.nu}, {"se", m.se_disp[0]}};
  }
  out["loglik"] = m.loglik;
  out["aic"] = m.aic;
  out["n_params"] = m.n_params;
  out["converged"] = m.converged;
  out["iterations"] = m.iterations;
  out["score_norm"] = m.score_norm;
  return out;
}

json test_report(const cmpmu::TestResult& t) {
  const char* method = t.method == cmpmu::TestMethod::Wald ? "wald"
                       : t.method == cmpmu::TestMethod::Lrt ? "lrt"
                                                            : "lrt_poisson";
  json out = {{"method", method},
              {"statistic", t.statistic},
              {"df_num", t.df_num},
              {"df_den", std::isnan(t.df_den) ? json(nullptr) : json(t.df_den)},
              {"p_chi2", t.p_chi2},
              {"p_f", std::isnan(t.p_f) ? json(nullptr) : json(t.p_f)}};
  if (!std::isnan(t.df_den)) {
    out["df_den_convention"] =
        "n - q with q counting mean-model coefficients only";
  }
  return out;
}

// ---------------------------------------------------------------- fit

struct FitCmd {
  FitFlags ff;

  int run() const {
    const cmpmu::Dataset ds = cmpmu::load_csv(ff.data);
    const cmpmu::FittedModel m = cmpmu::fit_glm(to_spec(ff), ds);
    std::cout << fit_report(m, ff).dump(2) << "\n";
    if (!m.converged) {
      std::cerr << "cmpmu: fit did not converge (score norm "
                << m.score_norm << ")\n";
      return 2;
    }
    return 0;
  }
};

// ---------------------------------------------------------------- test

struct TestCmd {
  FitFlags ff;
  std::string restricted_terms;
  bool poisson = false;
  bool wald = false;
  bool no_f = false;

  int run() const {
    const cmpmu::Dataset ds = cmpmu::load_csv(ff.data);
    const cmpmu::FittedModel full = cmpmu::fit_glm(to_spec(ff), ds);
    if (!full.converged) {
      std::cerr << "cmpmu: full model did not converge\n";
      return 2;
    }

    json out;
    if (poisson) {
      FitFlags pf = ff;
      pf.fixed_nu = 1.0;
      const cmpmu::FittedModel pois = cmpmu::fit_glm(to_spec(pf), ds);
      if (!pois.converged) {
        std::cerr << "cmpmu: Poisson reference fit did not converge\n";
        return 2;
      }
      out = test_report(cmpmu::lrt_poisson(full, pois));
      out["loglik_full"] = full.loglik;
      out["loglik_restricted"] = pois.loglik;
    } else {
      FitFlags rf = ff;
      rf.terms = restricted_terms;
      const cmpmu::FittedModel restr = cmpmu::fit_glm(to_spec(rf), ds);
      if (!restr.converged) {
        std::cerr << "cmpmu: restricted model did not converge\n";
        return 2;
      }
      const int r =
          static_cast<int>(full.beta.size() - restr.beta.size());
      if (r < 1) {
        throw cmpmu::Error(
            "test: the restricted model must drop at least one column of "
            "the full design");
      }
      out = test_report(cmpmu::lrt_composite(full, restr, r, !no_f));
      out["loglik_full"] = full.loglik;
      out["loglik_restricted"] = restr.loglik;

      if (wald) {
        // Wald test that the dropped design columns are jointly zero.
        const cmpmu::Formula fful = cmpmu::Formula::parse(ff.terms);
        const cmpmu::Formula frest = cmpmu::Formula::parse(restricted_terms);
        cmpmu::Formula dropped;
        for (const cmpmu::Term& t : fful.terms) {
          if (std::find(frest.terms.begin(), frest.terms.end(), t) ==
              frest.terms.end()) {
            dropped.terms.push_back(t);
          }
        }
        // Rebuild the full design on the rows the fit used so the dropped
        // terms map onto the right coefficient indices.
        std::vector<std::string> vars{ff.response};
        for (const auto& v : fful.variables()) vars.push_back(v);
        if (!ff.dispersion_terms.empty()) {
          for (const auto& v :
               cmpmu::Formula::parse(ff.dispersion_terms).variables()) {
            vars.push_back(v);
          }
        }
        if (!ff.offset.empty()) vars.push_back(ff.offset);
        const cmpmu::DesignMatrix dm =
            cmpmu::build_design(ds, fful, cmpmu::complete_rows(ds, vars));
        const std::vector<std::size_t> cols =
            cmpmu::columns_of_terms(dm, fful, dropped);
        cmpmu::Hypothesis h;
        h.constraint_matrix = Eigen::MatrixXd::Zero(
            static_cast<Eigen::Index>(cols.size()), full.beta.size());
        h.rhs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(cols.size()));
        for (std::size_t i = 0; i < cols.size(); ++i) {
          h.constraint_matrix(static_cast<Eigen::Index>(i),
                              static_cast<Eigen::Index>(cols[i])) = 1.0;
        }
        out["wald"] = test_report(cmpmu::wald_test(full, h));
      }
    }
    std::cout << out.dump(2) << "\n";
    return 0;
  }
};

// ---------------------------------------------------------------- pit

struct PitCmd {
  FitFlags ff;
  std::uint64_t seed = 0;
  int grid = 20;
  int bins = 10;
  bool histogram = false;
  std::string format = "tsv";

  int run() const {
    const cmpmu::Dataset ds = cmpmu::load_csv(ff.data);
    const cmpmu::ModelSpec spec = to_spec(ff);
    const cmpmu::GlmProblem pb = cmpmu::build_problem(spec, ds);
    const cmpmu::FittedModel m = cmpmu::fit_glm(pb);
    if (!m.converged) {
      std::cerr << "cmpmu: fit did not converge; PIT not computed\n";
      return 2;
    }
    const cmpmu::PitSample ps = cmpmu::pit(m, pb.y, seed);
    const auto table = cmpmu::pit_quantile_table(ps, grid);
    const auto counts = cmpmu::pit_histogram(ps, bins);

    if (format == "json") {
      json out;
      out["seed"] = ps.seed;
      out["n"] = ps.values.size();
      out["ks_statistic"] = ps.ks_statistic;
      out["ks_critical_5pct"] = cmpmu::ks_critical(ps.values.size(), 0.05);
      out["ks_critical_1pct"] = cmpmu::ks_critical(ps.values.size(), 0.01);
      json q = json::array();
      for (const auto& [a, b] : table) {
        q.push_back({{"uniform_quantile", a}, {"pit_quantile", b}});
      }
      out["quantile_table"] = q;
      json hist = json::array();
      for (int b = 0; b < bins; ++b) {
        hist.push_back({{"bin_lo", static_cast<double>(b) / bins},
                        {"bin_hi", static_cast<double>(b + 1) / bins},
                        {"count", counts[static_cast<std::size_t>(b)]}});
      }
      out["histogram"] = hist;
      std::cout << out.dump(2) << "\n";
    } else if (histogram) {
      std::cout << "bin_lo\tbin_hi\tcount\n";
      for (int b = 0; b < bins; ++b) {
        std::cout << fmt6(static_cast<double>(b) / bins) << "\t"
                  << fmt6(static_cast<double>(b + 1) / bins) << "\t"
                  << counts[static_cast<std::size_t>(b)] << "\n";
      }
    } else {
      std::cout << "uniform_quantile\tpit_quantile\n";
      for (const auto& [a, b] : table) {
        std::cout << fmt6(a) << "\t" << fmt6(b) << "\n";
      }
    }
    std::cerr << "cmpmu: ks statistic " << fmt6(ps.ks_statistic)
              << " (5% critical "
              << fmt6(cmpmu::ks_critical(ps.values.size(), 0.05))
              << ", seed " << ps.seed << ")\n";
    return 0;
  }
};

// ---------------------------------------------------------------- simulate

struct SimulateCmd {
  std::string config_path;
  std::string format = "tsv";

  int run() const {
    const cmpmu::StudyConfig cfg = cmpmu::parse_study_config(config_path);
    const cmpmu::StudyResult res = cmpmu::run_study(cfg);
    if (format == "json") {
      json out;
      out["n_requested"] = res.n_requested;
      out["n_effective"] = res.n_effective;
      out["n_failed"] = res.n_failed;
      out["df_num"] = res.df_num;
      json lv = json::array();
      for (const auto& l : res.levels) {
        lv.push_back({{"nominal", l.nominal},
                      {"n_reject", l.n_reject},
                      {"rate", l.rate},
                      {"std_error", l.std_error}});
      }
      out["levels"] = lv;
      std::cout << out.dump(2) << "\n";
    } else {
      std::cout
          << "nominal\tn_reject\tn_effective\tn_failed\trate\tstd_error\n";
      for (const auto& l : res.levels) {
        std::cout << fmt6(l.nominal) << "\t" << l.n_reject << "\t"
                  << res.n_effective << "\t" << res.n_failed << "\t"
                  << fmt6(l.rate) << "\t" << fmt6(l.std_error) << "\n";
      }
    }
    return 0;
  }
};

// ---------------------------------------------------------------- summarize

struct SummarizeCmd {
  std::string data;
  std::string format = "tsv";

  int run() const {
    const cmpmu::Dataset ds = cmpmu::load_csv(data);
    json rows = json::array();
    for (const cmpmu::Column& c : ds.cols) {
      json row;
      row["column"] = c.name;
      std::size_t missing = 0;
      for (std::size_t i = 0; i < ds.n_rows; ++i) {
        if (c.missing_at(i)) ++missing;
      }
      row["n"] = ds.n_rows;
      row["missing"] = missing;
      if (c.numeric) {
        double mn = std::numeric_limits<double>::infinity();
        double mx = -mn;
        long double s = 0.0L, s2 = 0.0L;
        std::size_t n = 0;
        bool binary = true;
        for (std::size_t i = 0; i < ds.n_rows; ++i) {
          if (c.missing_at(i)) continue;
          const double v = c.num[i];
          mn = std::min(mn, v);
          mx = std::max(mx, v);
          s += v;
          ++n;
          binary = binary && (v == 0.0 || v == 1.0);
        }
        const double mean = n ? static_cast<double>(s) / n : 0.0;
        for (std::size_t i = 0; i < ds.n_rows; ++i) {
          if (!c.missing_at(i)) {
            const double d = c.num[i] - mean;
            s2 += d * d;
          }
        }
        const double sd =
            n > 1 ? std::sqrt(static_cast<double>(s2) / (n - 1)) : 0.0;
        row["type"] = binary && n > 0 ? "binary" : "numeric";
        row["min"] = mn;
        row["max"] = mx;
        row["mean"] = mean;
        row["sd"] = sd;
        if (binary && n > 0) row["pct_ones"] = 100.0 * mean;
      } else {
        row["type"] = "categorical";
        std::vector<std::string> lv(c.str);
        std::sort(lv.begin(), lv.end());
        lv.erase(std::unique(lv.begin(), lv.end()), lv.end());
        row["n_levels"] = lv.size() - (missing > 0 ? 1 : 0);
      }
      rows.push_back(row);
    }

    if (format == "json") {
      std::cout << rows.dump(2) << "\n";
    } else {
      std::cout << "column\ttype\tn\tmissing\tmin\tmax\tmean\tsd\tpct_ones"
                   "\tn_levels\n";
      for (const auto& row : rows) {
        const std::string type = row["type"];
        std::cout << row["column"].get<std::string>() << "\t" << type << "\t"
                  << row["n"].get<std::size_t>() << "\t"
                  << row["missing"].get<std::size_t>() << "\t";
        if (type == "categorical") {
          std::cout << "\t\t\t\t\t" << row["n_levels"].get<std::size_t>()
                    << "\n";
        } else {
          std::cout << fmt6(row["min"].get<double>()) << "\t"
                    << fmt6(row["max"].get<double>()) << "\t"
                    << fmt6(row["mean"].get<double>()) << "\t"
                    << fmt6(row["sd"].get<double>()) << "\t";
          if (row.contains("pct_ones")) {
            std::cout << fmt6(row["pct_ones"].get<double>());
          }
          std::cout << "\t\n";
        }
      }
    }
    return 0;
  }
};

// ---------------------------------------------------------------- pmf-table

struct PmfTableCmd {
  std::string mu_list;
  std::string nu_list;
  std::int64_t max_y = -1;  // -1: automatic per (mu, nu)

  int run() const {
    const std::vector<double> mus = split_doubles(mu_list, "mu");
    const std::vector<double> nus = split_doubles(nu_list, "nu");
    std::cout << "mu\tnu\ty\tpmf\n";
    for (double mu : mus) {
      for (double nu : nus) {
        const cmpmu::CmpParams p = cmpmu::make_params(mu, nu);
        std::int64_t top = max_y;
        if (top < 0) {
          top = mu == 0.0 ? 0 : cmpmu::quantile(1.0 - 1e-6, p);
        }
        top = std::min(top, p.truncation);
        for (std::int64_t y = 0; y <= top; ++y) {
          std::cout << fmt6(mu) << "\t" << fmt6(nu) << "\t" << y << "\t"
                    << fmt6(cmpmu::pmf(y, p)) << "\n";
        }
      }
    }
    return 0;
  }
};

int dispatch(int argc, char** argv) {
  CLI::App app{
      "mean-parametrized Conway-Maxwell-Poisson count models: fitting, "
      "testing, diagnostics, and simulation studies"};
  app.require_subcommand(1);

  FitCmd fit;
  CLI::App* cfit = app.add_subcommand(
      "fit", "fit a count regression and print a JSON report");
  add_fit_flags(cfit, fit.ff);

  TestCmd test;
  CLI::App* ctest_ = app.add_subcommand(
      "test", "likelihood-ratio / Wald tests between nested models");
  add_fit_flags(ctest_, test.ff, /*with_fixed_nu=*/false);
  auto* rt = ctest_->add_option("--restricted-terms", test.restricted_terms,
                                "mean-model formula of the restricted model");
  auto* po = ctest_->add_flag("--poisson", test.poisson,
                              "test nu = 1 against the Poisson fit");
  rt->excludes(po);
  ctest_->add_flag("--wald", test.wald,
                   "also report the Wald test of the dropped columns");
  ctest_->add_flag("--no-f", test.no_f, "skip the F calibration");

  PitCmd pitc;
  CLI::App* cpit = app.add_subcommand(
      "pit", "randomized PIT uniformity diagnostics for a fitted model");
  add_fit_flags(cpit, pitc.ff, /*with_fixed_nu=*/true, /*with_seed=*/false);
  cpit->add_option("--seed", pitc.seed, "seed for the PIT randomization")
      ->required();
  cpit->add_option("--grid", pitc.grid, "quantile-table rows (default 20)");
  cpit->add_option("--bins", pitc.bins, "histogram bins (default 10)");
  cpit->add_flag("--histogram", pitc.histogram,
                 "emit the histogram TSV instead of the quantile table");
  cpit->add_option("--format", pitc.format, "tsv or json")
      ->check(CLI::IsMember({"tsv", "json"}));

  SimulateCmd sim;
  CLI::App* csim = app.add_subcommand(
      "simulate", "run a replicated Type-I-error study from a config file");
  csim->add_option("--config", sim.config_path, "key=value study config")
      ->required();
  csim->add_option("--format", sim.format, "tsv or json")
      ->check(CLI::IsMember({"tsv", "json"}));

  SummarizeCmd summ;
  CLI::App* csum =
      app.add_subcommand("summarize", "per-column summary statistics");
  csum->add_option("--data", summ.data, "CSV file")->required();
  csum->add_option("--format", summ.format, "tsv or json")
      ->check(CLI::IsMember({"tsv", "json"}));

  PmfTableCmd pmft;
  CLI::App* cpmf = app.add_subcommand(
      "pmf-table", "probability mass tables over a (mu, nu) grid");
  cpmf->add_option("--mu", pmft.mu_list, "comma-separated means")->required();
  cpmf->add_option("--nu", pmft.nu_list, "comma-separated dispersions")
      ->required();
  cpmf->add_option("--max-y", pmft.max_y,
                   "largest y to print (default: the 1-1e-6 quantile)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;  // --help exits 0; usage errors exit 1
  }

  if (cfit->parsed()) return fit.run();
  if (ctest_->parsed()) {
    if (!test.poisson && test.restricted_terms.empty()) {
      std::cerr << "cmpmu: test needs --restricted-terms or --poisson\n";
      return 1;
    }
    return test.run();
  }
  if (cpit->parsed()) return pitc.run();
  if (csim->parsed()) return sim.run();
  if (csum->parsed()) return summ.run();
  if (cpmf->parsed()) return pmft.run();
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return dispatch(argc, argv);
  } catch (const cmpmu::NoConvergence& e) {
    std::cerr << "cmpmu: " << e.what() << "\n";
    return 2;
  } catch (const cmpmu::MeanOverflow& e) {
    std::cerr << "cmpmu: " << e.what() << "\n";
    return 2;
  } catch (const cmpmu::SingularInformation& e) {
    std::cerr << "cmpmu: " << e.what() << "\n";
    return 2;
  } catch (const cmpmu::SingularConstraintCov& e) {
    std::cerr << "cmpmu: " << e.what() << "\n";
    return 2;
  } catch (const cmpmu::Error& e) {
    std::cerr << "cmpmu: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "cmpmu: " << e.what() << "\n";
    return 1;
  }
}
