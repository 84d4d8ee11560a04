#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "cmpmu/dataset.hpp"
#include "cmpmu/fit.hpp"
#include "cmpmu/model.hpp"

namespace cmpmu {

// Replicated Type-I-error study: resample covariate rows, generate counts
// from a fully specified model, fit full and restricted models, and tally
// rejections of the restricted hypothesis at the nominal levels.
struct StudyConfig {
  std::string covariates_path;  // CSV whose rows are resampled
  std::string terms;            // full mean-model formula
  Link link = Link::Log;
  std::string family = "cmp_mu";  // generator family: cmp_mu or poisson
  double true_nu = 1.0;           // generator dispersion (cmp_mu family)
  std::map<std::string, double> beta;  // design-column label -> coefficient

  enum class TestKind { DropTerms, Poisson };
  TestKind test_kind = TestKind::DropTerms;
  std::string drop;  // terms removed in the restricted model ("" = none)

  std::size_t n_per_dataset = 0;
  std::size_t n_replicates = 0;
  std::vector<double> nominal_levels{0.05, 0.01};
  std::uint64_t base_seed = 0;
};

// Plain-text `key=value` study description ('#' comment lines allowed).
// Keys: covariates, terms, link, family, true_nu, beta.<label>, test
// ("poisson" or "drop:<terms>"), n_per_dataset, n_replicates,
// nominal_levels (comma-separated), base_seed.
StudyConfig parse_study_config(std::istream& in);
StudyConfig parse_study_config(const std::string& path);

struct SimulatedData {
  Eigen::MatrixXd X;               // resampled design rows
  std::vector<std::int64_t> y;     // generated counts
  std::vector<std::size_t> rows;   // source row index of each draw
};

// Resamples n rows of source_X with replacement and draws one count per row
// from the model (beta, nu) under the link; bit-reproducible given seed.
SimulatedData simulate_dataset(const Eigen::MatrixXd& source_X,
                               const Eigen::VectorXd& beta, double nu,
                               Link link, std::size_t n, std::uint64_t seed,
                               const SeriesControl& series = {});

struct LevelRate {
  double nominal = 0.0;
  std::size_t n_reject = 0;
  double rate = 0.0;       // n_reject / n_effective
  double std_error = 0.0;  // binomial SE at the empirical rate
};

struct StudyResult {
  std::size_t n_requested = 0;
  std::size_t n_effective = 0;  // converged replicates entering the rates
  std::size_t n_failed = 0;     // excluded: non-convergence or fit errors
  int df_num = 0;               // constraints tested (0 = degenerate test)
  std::vector<LevelRate> levels;
};

StudyResult run_study(const StudyConfig& cfg, const FitControl& ctl = {});

}  // namespace cmpmu
