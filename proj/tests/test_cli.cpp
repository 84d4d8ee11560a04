// End-to-end checks of the cmpmu command-line tool: output formats parse,
// numbers agree with the library, and exit codes follow the contract
// (0 success, 1 usage/data error, 2 non-convergence).
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <sys/wait.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cmpmu/dataset.hpp"
#include "cmpmu/distribution.hpp"
#include "cmpmu/fit.hpp"
#include "cmpmu/model.hpp"
#include "doctest.h"
#include "json.hpp"

using nlohmann::json;

namespace {

struct RunResult {
  int exit_code = -1;
  std::string out;
};

RunResult run_cli(const std::string& args) {
  const std::string cmd = std::string(CMPMU_CLI_PATH) + " " + args;
  RunResult r;
  FILE* p = ::popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  char buf[4096];
  std::size_t got;
  while ((got = std::fread(buf, 1, sizeof(buf), p)) > 0) {
    r.out.append(buf, got);
  }
  const int status = ::pclose(p);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::vector<std::string>> parse_tsv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> fields;
    std::istringstream ls(line);
    std::string f;
    while (std::getline(ls, f, '\t')) fields.push_back(f);
    rows.push_back(fields);
  }
  return rows;
}

// A deterministic dispersed dataset shared by the fit/test/pit cases.
std::string write_fixture_csv() {
  const std::string path = "cli_fixture.csv";
  std::ofstream out(path);
  out << "y,x,g\n";
  std::mt19937_64 rng(2024);
  for (int i = 0; i < 200; ++i) {
    const double x = -1.0 + 2.0 * (i % 50) / 49.0;
    const char* g = (i % 3 == 0) ? "B" : "A";
    const double mu =
        std::exp(0.6 + 0.4 * x + (i % 3 == 0 ? 0.3 : 0.0));
    const cmpmu::CmpParams p = cmpmu::make_params(mu, 1.4);
    const auto draw = cmpmu::sample(1, p, rng);
    out << draw[0] << "," << x << "," << g << "\n";
  }
  return path;
}

}  // namespace

TEST_CASE("pmf-table reproduces the Poisson mass at nu = 1") {
  const RunResult r = run_cli("pmf-table --mu 3 --nu 1 --max-y 15");
  REQUIRE(r.exit_code == 0);
  const auto rows = parse_tsv(r.out);
  REQUIRE(rows.size() == 17);  // header + y = 0..15
  CHECK(rows[0] == std::vector<std::string>({"mu", "nu", "y", "pmf"}));
  for (std::size_t i = 1; i < rows.size(); ++i) {
    REQUIRE(rows[i].size() == 4);
    const int y = std::stoi(rows[i][2]);
    CHECK(y == static_cast<int>(i) - 1);
    const double pmf = std::stod(rows[i][3]);
    const double expect =
        std::exp(-3.0 + y * std::log(3.0) - std::lgamma(y + 1.0));
    CHECK(pmf == doctest::Approx(expect).epsilon(1e-4));
  }
}

TEST_CASE("pmf-table handles comma lists and rejects bad values") {
  const RunResult r = run_cli("pmf-table --mu 3,6 --nu 0.4,1 --max-y 3");
  REQUIRE(r.exit_code == 0);
  const auto rows = parse_tsv(r.out);
  CHECK(rows.size() == 1 + 4 * 4);  // header + 4 cells x 4 y-values

  const RunResult bad = run_cli("pmf-table --mu 3,zap --nu 1 2>cli_err.txt");
  CHECK(bad.exit_code == 1);
  CHECK(slurp("cli_err.txt").find("zap") != std::string::npos);
}

TEST_CASE("fit emits a JSON report matching the in-process fit") {
  const std::string csv = write_fixture_csv();
  const RunResult r = run_cli("fit --data " + csv +
                              " --response y --terms \"x + g\" 2>/dev/null");
  REQUIRE(r.exit_code == 0);
  const json doc = json::parse(r.out);

  cmpmu::ModelSpec spec;
  spec.response = "y";
  spec.mean_terms = "x + g";
  const cmpmu::FittedModel m = cmpmu::fit_glm(spec, cmpmu::load_csv(csv));

  CHECK(doc.at("converged").get<bool>());
  CHECK(doc.at("n").get<int>() == 200);
  CHECK(doc.at("loglik").get<double>() ==
        doctest::Approx(m.loglik).epsilon(1e-12));
  CHECK(doc.at("aic").get<double>() == doctest::Approx(m.aic).epsilon(1e-12));
  const json coefs = doc.at("coefficients");
  REQUIRE(coefs.size() == 3);
  CHECK(coefs[0].at("name").get<std::string>() == "intercept");
  CHECK(coefs[1].at("name").get<std::string>() == "x");
  CHECK(coefs[2].at("name").get<std::string>() == "g(B)");
  for (Eigen::Index j = 0; j < 3; ++j) {
    const json& c = coefs[static_cast<std::size_t>(j)];
    CHECK(c.at("estimate").get<double>() ==
          doctest::Approx(m.beta[j]).epsilon(1e-12));
    CHECK(c.at("se").get<double>() ==
          doctest::Approx(m.se_beta[j]).epsilon(1e-12));
    const double p = c.at("p").get<double>();
    CHECK(p >= 0.0);
    CHECK(p <= 1.0);
  }
  CHECK(doc.at("dispersion").at("kind").get<std::string>() == "constant");
  CHECK(doc.at("dispersion").at("nu").get<double>() ==
        doctest::Approx(m.nu).epsilon(1e-12));
  CHECK(doc.at("dispersion").at("se").get<double>() > 0.0);
}

TEST_CASE("fit with --fixed-nu reports a fixed dispersion block") {
  const std::string csv = write_fixture_csv();
  const RunResult r =
      run_cli("fit --data " + csv +
              " --response y --terms x --fixed-nu 1 2>/dev/null");
  REQUIRE(r.exit_code == 0);
  const json doc = json::parse(r.out);
  CHECK(doc.at("dispersion").at("kind").get<std::string>() == "fixed");
  CHECK(doc.at("dispersion").at("nu").get<double>() == 1.0);
  CHECK(doc.at("n_params").get<int>() == 2);
}

TEST_CASE("fit exits 1 and names the offending column") {
  const std::string csv = write_fixture_csv();
  const RunResult r = run_cli("fit --data " + csv +
                              " --response zz --terms x 2>cli_err.txt");
  CHECK(r.exit_code == 1);
  CHECK(slurp("cli_err.txt").find("zz") != std::string::npos);

  const RunResult miss =
      run_cli("fit --data no_such_file.csv --response y --terms x "
              "2>cli_err.txt");
  CHECK(miss.exit_code == 1);
}

TEST_CASE("usage errors exit 1 and --help exits 0") {
  CHECK(run_cli("2>/dev/null").exit_code == 1);
  CHECK(run_cli("fit 2>/dev/null").exit_code == 1);  // missing required flags
  CHECK(run_cli("--help >/dev/null").exit_code == 0);
}

TEST_CASE("test subcommand emits LRT and Wald JSON") {
  const std::string csv = write_fixture_csv();
  const RunResult r =
      run_cli("test --data " + csv +
              " --response y --terms \"x + g\" --restricted-terms x --wald "
              "2>/dev/null");
  REQUIRE(r.exit_code == 0);
  const json doc = json::parse(r.out);
  CHECK(doc.at("method").get<std::string>() == "lrt");
  CHECK(doc.at("statistic").get<double>() >= 0.0);
  CHECK(doc.at("df_num").get<double>() == 1.0);
  CHECK(doc.at("df_den").get<double>() == 197.0);  // n - q = 200 - 3
  const double p_chi2 = doc.at("p_chi2").get<double>();
  const double p_f = doc.at("p_f").get<double>();
  CHECK(p_chi2 > 0.0);
  CHECK(p_chi2 <= 1.0);
  CHECK(p_f > 0.0);
  CHECK(p_f <= 1.0);
  CHECK(doc.at("loglik_full").get<double>() >=
        doc.at("loglik_restricted").get<double>() - 1e-9);
  const json w = doc.at("wald");
  CHECK(w.at("method").get<std::string>() == "wald");
  CHECK(w.at("statistic").get<double>() >= 0.0);
  CHECK(w.at("df_den").is_null());

  const RunResult pois = run_cli(
      "test --data " + csv + " --response y --terms \"x + g\" --poisson "
      "2>/dev/null");
  REQUIRE(pois.exit_code == 0);
  const json pd = json::parse(pois.out);
  CHECK(pd.at("method").get<std::string>() == "lrt_poisson");
  CHECK(pd.at("df_num").get<double>() == 1.0);
  // the fixture is generated at nu = 1.4, so the Poisson test has material
  // evidence to work with
  CHECK(pd.at("statistic").get<double>() > 0.0);

  const RunResult neither =
      run_cli("test --data " + csv +
              " --response y --terms \"x + g\" 2>cli_err.txt");
  CHECK(neither.exit_code == 1);
}

TEST_CASE("pit emits quantile and histogram TSV plus a JSON variant") {
  const std::string csv = write_fixture_csv();
  const std::string base =
      "pit --data " + csv + " --response y --terms \"x + g\" --seed 11 ";

  const RunResult q = run_cli(base + "2>/dev/null");
  REQUIRE(q.exit_code == 0);
  const auto qrows = parse_tsv(q.out);
  REQUIRE(qrows.size() == 21);  // header + default 20-point grid
  CHECK(qrows[0] ==
        std::vector<std::string>({"uniform_quantile", "pit_quantile"}));
  for (std::size_t i = 1; i < qrows.size(); ++i) {
    REQUIRE(qrows[i].size() == 2);
    const double u = std::stod(qrows[i][0]);
    const double v = std::stod(qrows[i][1]);
    CHECK(u >= 0.0);
    CHECK(u <= 1.0);
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }

  const RunResult h = run_cli(base + "--histogram --bins 8 2>/dev/null");
  REQUIRE(h.exit_code == 0);
  const auto hrows = parse_tsv(h.out);
  REQUIRE(hrows.size() == 9);
  long long total = 0;
  for (std::size_t i = 1; i < hrows.size(); ++i) {
    total += std::stoll(hrows[i][2]);
  }
  CHECK(total == 200);

  const RunResult j = run_cli(base + "--format json 2>/dev/null");
  REQUIRE(j.exit_code == 0);
  const json doc = json::parse(j.out);
  CHECK(doc.at("seed").get<std::uint64_t>() == 11);
  CHECK(doc.at("n").get<int>() == 200);
  CHECK(doc.at("ks_statistic").get<double>() > 0.0);
  CHECK(doc.at("quantile_table").size() == 20);
  CHECK(doc.at("histogram").size() == 10);

  // deterministic for a given seed
  const RunResult q2 = run_cli(base + "2>/dev/null");
  CHECK(q2.out == q.out);
}

TEST_CASE("summarize reports numeric, binary, and categorical columns") {
  {
    std::ofstream out("cli_summ.csv");
    out << "v,b,s\n1,0,red\n2,1,blue\n3,1,red\n4,0,green\n";
  }
  const RunResult r = run_cli("summarize --data cli_summ.csv");
  REQUIRE(r.exit_code == 0);
  const auto rows = parse_tsv(r.out);
  REQUIRE(rows.size() == 4);
  REQUIRE(rows[0].size() == 10);
  CHECK(rows[0][0] == "column");

  CHECK(rows[1][0] == "v");
  CHECK(rows[1][1] == "numeric");
  CHECK(std::stod(rows[1][4]) == 1.0);   // min
  CHECK(std::stod(rows[1][5]) == 4.0);   // max
  CHECK(std::stod(rows[1][6]) == doctest::Approx(2.5).epsilon(1e-9));
  CHECK(std::stod(rows[1][7]) ==
        doctest::Approx(std::sqrt(5.0 / 3.0)).epsilon(1e-5));

  CHECK(rows[2][0] == "b");
  CHECK(rows[2][1] == "binary");
  CHECK(std::stod(rows[2][8]) == doctest::Approx(50.0).epsilon(1e-9));

  CHECK(rows[3][0] == "s");
  CHECK(rows[3][1] == "categorical");
  CHECK(rows[3][9] == "3");

  const json doc =
      json::parse(run_cli("summarize --data cli_summ.csv --format json").out);
  REQUIRE(doc.is_array());
  CHECK(doc.size() == 3);
  CHECK(doc[0].at("mean").get<double>() == doctest::Approx(2.5));
}

TEST_CASE("simulate runs a small study from a config file") {
  {
    std::ofstream cov("cli_cov.csv");
    cov << "x\n";
    for (int i = 0; i < 60; ++i) {
      cov << (-1.0 + 2.0 * i / 59.0) << "\n";
    }
  }
  {
    std::ofstream conf("cli_study.conf");
    conf << "covariates=cli_cov.csv\n"
            "terms=x\n"
            "test=drop:x\n"
            "true_nu=1.0\n"
            "beta.intercept=0.4\n"
            "beta.x=0.0\n"
            "n_per_dataset=50\n"
            "n_replicates=10\n"
            "nominal_levels=0.05,0.01\n"
            "base_seed=31\n";
  }
  const RunResult r = run_cli("simulate --config cli_study.conf 2>/dev/null");
  REQUIRE(r.exit_code == 0);
  const auto rows = parse_tsv(r.out);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0][0] == "nominal");
  CHECK(std::stod(rows[1][0]) == doctest::Approx(0.05));
  CHECK(std::stoll(rows[1][2]) + std::stoll(rows[1][3]) == 10);

  const RunResult j =
      run_cli("simulate --config cli_study.conf --format json 2>/dev/null");
  REQUIRE(j.exit_code == 0);
  const json doc = json::parse(j.out);
  CHECK(doc.at("n_requested").get<int>() == 10);
  CHECK(doc.at("levels").size() == 2);

  const RunResult bad = run_cli("simulate --config no_conf.txt 2>cli_err.txt");
  CHECK(bad.exit_code == 1);
}
