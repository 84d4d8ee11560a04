#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "cmpmu/errors.hpp"
#include "cmpmu/special.hpp"

using doctest::Approx;
namespace sp = cmpmu::special;

// Reference values below were computed independently with mpfr-backed
// routines (scipy.special at full double precision) and frozen here.

TEST_CASE("chi-square survival function matches reference values") {
  CHECK(sp::chi2_sf(3.841458820694124, 1.0) ==
        Approx(0.049999999999999892).epsilon(1e-12));
  CHECK(sp::chi2_sf(5.991464547107979, 2.0) ==
        Approx(0.050000000000000072).epsilon(1e-12));
  CHECK(sp::chi2_sf(0.5, 3.0) == Approx(0.9188914116546758).epsilon(1e-12));
  CHECK(sp::chi2_sf(11.344866730144373, 3.0) ==
        Approx(0.0099999999999999898).epsilon(1e-12));
  CHECK(sp::chi2_sf(2.0, 5.5) == Approx(0.88902642747434912).epsilon(1e-12));
  CHECK(sp::chi2_sf(25.0, 10.0) ==
        Approx(0.0053455054871340687).epsilon(1e-12));
}

TEST_CASE("chi-square tail closed forms and edge cases") {
  // df = 2 is exponential: sf(x) = exp(-x/2).
  for (double x : {0.1, 1.0, 4.0, 13.0}) {
    CHECK(sp::chi2_sf(x, 2.0) == Approx(std::exp(-0.5 * x)).epsilon(1e-13));
  }
  CHECK(sp::chi2_sf(0.0, 4.0) == 1.0);
  CHECK(sp::chi2_sf(-3.0, 4.0) == 1.0);
  CHECK_THROWS_AS(sp::chi2_sf(1.0, 0.0), cmpmu::Error);
}

TEST_CASE("F survival function matches reference values") {
  CHECK(sp::f_sf(1.0, 3.0, 10.0) ==
        Approx(0.43233720302169698).epsilon(1e-12));
  CHECK(sp::f_sf(2.5, 5.0, 116.0) ==
        Approx(0.034477681497162016).epsilon(1e-12));
  CHECK(sp::f_sf(3.9, 1.0, 30.0) ==
        Approx(0.057552065116796752).epsilon(1e-12));
  CHECK(sp::f_sf(0.25, 4.0, 7.0) ==
        Approx(0.90081589124327466).epsilon(1e-12));
  // F(2,2) has sf(x) = 1/(1+x).
  CHECK(sp::f_sf(10.0, 2.0, 2.0) ==
        Approx(0.090909090909090912).epsilon(1e-12));
  CHECK(sp::f_sf(0.0, 3.0, 5.0) == 1.0);
}

TEST_CASE("incomplete gamma and beta identities") {
  for (double a : {0.5, 1.0, 2.5, 7.0, 40.0}) {
    for (double x : {0.1, 0.9, 2.0, 8.0, 55.0}) {
      CHECK(sp::regularized_gamma_p(a, x) + sp::regularized_gamma_q(a, x) ==
            Approx(1.0).epsilon(1e-13));
    }
  }
  for (double a : {0.4, 1.0, 3.0, 11.0}) {
    for (double b : {0.7, 2.0, 9.5}) {
      for (double x : {0.05, 0.3, 0.62, 0.97}) {
        CHECK(sp::regularized_beta(x, a, b) +
                  sp::regularized_beta(1.0 - x, b, a) ==
              Approx(1.0).epsilon(1e-12));
      }
    }
  }
  // I_x(1,1) is the identity.
  CHECK(sp::regularized_beta(0.37, 1.0, 1.0) == Approx(0.37).epsilon(1e-14));
  CHECK(sp::regularized_beta(0.0, 2.0, 3.0) == 0.0);
  CHECK(sp::regularized_beta(1.0, 2.0, 3.0) == 1.0);
  CHECK_THROWS_AS(sp::regularized_beta(1.5, 1.0, 1.0), cmpmu::Error);
  CHECK_THROWS_AS(sp::regularized_gamma_p(-1.0, 2.0), cmpmu::Error);
}

TEST_CASE("tail functions are monotone in the statistic") {
  double prev = 1.0;
  for (double x = 0.5; x < 30.0; x += 0.5) {
    const double s = sp::chi2_sf(x, 4.0);
    CHECK(s < prev);
    prev = s;
  }
  prev = 1.0;
  for (double x = 0.25; x < 12.0; x += 0.25) {
    const double s = sp::f_sf(x, 3.0, 20.0);
    CHECK(s < prev);
    prev = s;
  }
}
