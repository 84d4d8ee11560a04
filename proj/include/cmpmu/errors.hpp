#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cmpmu {

// Base class for everything thrown by this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Series sum cannot converge for the requested parameters (e.g. nu = 0 with
// rate >= 1, where the geometric series diverges).
struct DivergentSeries : Error {
  using Error::Error;
};

// The truncation point needed to reach the requested tail tolerance exceeds
// the configured term cap.
struct TruncationLimit : Error {
  using Error::Error;
};

// An iterative solver exhausted its iteration budget.  `residual` holds the
// final objective/score residual for diagnostics.
struct NoConvergence : Error {
  double residual;
  NoConvergence(const std::string& msg, double resid)
      : Error(msg), residual(resid) {}
};

// Design matrix is not full column rank.
struct RankDeficientDesign : Error {
  using Error::Error;
};

// A fitted mean exceeded the configured overflow guard.
struct MeanOverflow : Error {
  using Error::Error;
};

// Fisher information (or its plug-in estimate) is numerically singular.
struct SingularInformation : Error {
  using Error::Error;
};

// Constraint covariance M' Cov M in a Wald test is singular.
struct SingularConstraintCov : Error {
  using Error::Error;
};

// Likelihood-ratio comparison where the restricted model is not nested in the
// full model (restricted log-likelihood exceeds the full one beyond rounding).
struct NotNested : Error {
  using Error::Error;
};

// Malformed input (CSV cell, formula string, study config line, ...).
// `row`/`col` are 1-based where applicable, 0 otherwise.
struct ParseError : Error {
  std::size_t row = 0;
  std::size_t col = 0;
  explicit ParseError(const std::string& msg, std::size_t r = 0,
                      std::size_t c = 0)
      : Error(msg), row(r), col(c) {}
};

// No usable rows/observations.
struct EmptyData : Error {
  using Error::Error;
};

// A formula or model references a column the dataset does not have.
struct UnknownVariable : Error {
  using Error::Error;
};

// Vector lengths disagree (response vs design rows, offsets, ...).
struct LengthMismatch : Error {
  using Error::Error;
};

// Data carry no information for the requested fit (e.g. fewer than two
// observations for an iid fit).
struct DegenerateData : Error {
  using Error::Error;
};

// A simulation study configuration that cannot generate valid data.
struct GeneratorMisspecified : Error {
  using Error::Error;
};

}  // namespace cmpmu
