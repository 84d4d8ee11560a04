// Tests for the randomized PIT, its uniformity under the true model, and
// the quantile-table / histogram summaries.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <random>

#include "cmpmu/diagnostics.hpp"
#include "cmpmu/distribution.hpp"
#include "cmpmu/errors.hpp"
#include "cmpmu/fit.hpp"
#include "doctest.h"

using namespace cmpmu;

TEST_CASE("pit reproduces its defining construction") {
  const CmpParams p = make_params(2.5, 1.3);
  const auto y = sample(p, 50, 97u);
  const Eigen::VectorXd mu = Eigen::VectorXd::Constant(50, 2.5);
  const Eigen::VectorXd nu = Eigen::VectorXd::Constant(50, 1.3);
  const PitSample ps = pit(mu, nu, y, 1234u);

  CHECK(ps.seed == 1234u);
  REQUIRE(ps.values.size() == 50);
  CHECK(std::is_sorted(ps.values.begin(), ps.values.end()));
  for (double u : ps.values) {
    CHECK(u >= 0.0);
    CHECK(u <= 1.0);
  }

  // replicate the v stream: u_i = F(y_i - 1) + v_i p(y_i), F(-1) = 0
  std::mt19937_64 rng(1234u);
  std::vector<double> expect(50);
  for (std::size_t i = 0; i < 50; ++i) {
    const double v = uniform01(rng);
    expect[i] = cdf(y[i] - 1, p) + v * pmf(y[i], p);
    if (y[i] == 0) {
      CHECK(expect[i] == doctest::Approx(v * pmf(0, p)).epsilon(1e-15));
    }
  }
  std::sort(expect.begin(), expect.end());
  for (std::size_t i = 0; i < 50; ++i) {
    CHECK(ps.values[i] == doctest::Approx(expect[i]).epsilon(1e-14));
  }

  // determinism in the seed
  const PitSample again = pit(mu, nu, y, 1234u);
  CHECK(again.values == ps.values);
  const PitSample other = pit(mu, nu, y, 1235u);
  CHECK(other.values != ps.values);
}

TEST_CASE("pit under the true model is exactly uniform") {
  const std::size_t n = 10000;
  const CmpParams p = make_params(2.3, 1.7);
  const Eigen::VectorXd mu = Eigen::VectorXd::Constant(n, 2.3);
  const Eigen::VectorXd nu = Eigen::VectorXd::Constant(n, 1.7);
  const double crit1 = ks_critical(n, 0.01);

  int pass = 0;
  double mean_u = 0.0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    const auto y = sample(p, n, 1000 + s);
    const PitSample ps = pit(mu, nu, y, 5000 + s);
    if (ps.ks_statistic < crit1) ++pass;
    if (s == 0) {
      for (double u : ps.values) mean_u += u;
      mean_u /= static_cast<double>(n);
    }
  }
  CHECK(pass >= 95);
  CHECK(std::fabs(mean_u - 0.5) < 4.0 * std::sqrt(1.0 / 12.0 / n));
}

TEST_CASE("pit flags a grossly misspecified model") {
  const std::size_t n = 2000;
  const CmpParams truth = make_params(3.0, 0.2);  // strongly overdispersed
  const auto y = sample(truth, n, 31u);
  long double s = 0.0L;
  for (auto v : y) s += v;
  const double ybar = static_cast<double>(s) / n;

  // fit nothing: just evaluate the PIT under a Poisson with the same mean
  const Eigen::VectorXd mu = Eigen::VectorXd::Constant(n, ybar);
  const Eigen::VectorXd nu = Eigen::VectorXd::Ones(n);
  const PitSample ps = pit(mu, nu, y, 77u);
  CHECK(ps.ks_statistic > ks_critical(n, 0.01));
  CHECK(ps.ks_statistic > 3.0 * ks_critical(n, 0.05));
}

TEST_CASE("pit accepts a fitted model and validates lengths") {
  const std::size_t n = 1500;
  const CmpParams truth = make_params(4.0, 2.1);
  const auto y = sample(truth, n, 41u);

  GlmProblem pb;
  pb.X = Eigen::MatrixXd::Ones(n, 1);
  pb.y = y;
  pb.link = Link::Log;
  const FittedModel m = fit_glm(pb);
  REQUIRE(m.converged);

  const PitSample ps = pit(m, y, 99u);
  CHECK(ps.values.size() == n);
  CHECK(ps.ks_statistic < ks_critical(n, 0.05));

  const std::vector<std::int64_t> short_y(y.begin(), y.begin() + 10);
  CHECK_THROWS_AS(pit(m, short_y, 99u), LengthMismatch);
}

TEST_CASE("quantile table lies on the diagonal for uniform plotting values") {
  PitSample ps;
  const std::size_t n = 200;
  ps.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    ps.values[i] = (static_cast<double>(i) + 0.5) / n;
  }

  const auto table = pit_quantile_table(ps, 20);
  REQUIRE(table.size() == 20);
  for (std::size_t j = 0; j < table.size(); ++j) {
    CHECK(table[j].first == doctest::Approx((j + 0.5) / 20.0));
    CHECK(table[j].second == doctest::Approx(table[j].first).epsilon(1e-12));
    if (j > 0) CHECK(table[j].second >= table[j - 1].second);
  }
  CHECK_THROWS_AS(pit_quantile_table(ps, 1), Error);

  // grid finer than the sample still clamps to the observed range
  const auto fine = pit_quantile_table(ps, 1000);
  CHECK(fine.front().second >= ps.values.front());
  CHECK(fine.back().second <= ps.values.back());
}

TEST_CASE("histogram counts") {
  PitSample centers;
  centers.values = {0.05, 0.15, 0.25, 0.35, 0.45, 0.55, 0.65, 0.75, 0.85, 0.95};
  const auto one_each = pit_histogram(centers, 10);
  REQUIRE(one_each.size() == 10);
  for (auto c : one_each) CHECK(c == 1);

  // u = 1 lands in the last bin
  PitSample edge;
  edge.values = {0.0, 1.0};
  const auto two = pit_histogram(edge, 4);
  CHECK(two[0] == 1);
  CHECK(two[3] == 1);
  CHECK_THROWS_AS(pit_histogram(edge, 0), Error);

  // binomial band on simulated uniforms
  const std::size_t n = 10000;
  std::mt19937_64 rng(55u);
  PitSample u;
  u.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) u.values[i] = uniform01(rng);
  std::sort(u.values.begin(), u.values.end());
  const auto counts = pit_histogram(u, 10);
  std::int64_t total = 0;
  const double band = 4.0 * std::sqrt(n * 0.1 * 0.9);
  for (auto c : counts) {
    total += c;
    CHECK(std::fabs(static_cast<double>(c) - 1000.0) < band);
  }
  CHECK(total == static_cast<std::int64_t>(n));
}

TEST_CASE("ks critical values") {
  CHECK(ks_critical(100, 0.05) == doctest::Approx(0.1358));
  CHECK(ks_critical(100, 0.01) == doctest::Approx(0.1628));
  CHECK_THROWS_AS(ks_critical(100, 0.10), Error);
  CHECK_THROWS_AS(ks_critical(0, 0.05), Error);
}
