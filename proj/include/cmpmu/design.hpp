#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "cmpmu/dataset.hpp"
#include "cmpmu/formula.hpp"

namespace cmpmu {

// Dense model matrix: intercept column first, then each formula term's
// columns in order.  Categorical variables are dummy-coded against the
// lexicographically smallest level; labels take the forms `intercept`,
// `var`, `var(Level)`, `a:b`, `var^2`.
struct DesignMatrix {
  Eigen::MatrixXd X;
  std::vector<std::string> labels;
  // Per column: -1 for the intercept, otherwise the index of the generating
  // term in the formula.
  std::vector<int> term_index;
  std::map<std::string, std::string> reference_levels;
  std::vector<std::size_t> rows;  // source dataset row of each design row
};

DesignMatrix build_design(const Dataset& ds, const Formula& f,
                          const std::vector<std::size_t>& rows);

// Columns of `full` whose generating term appears in `drop`; used to form
// restricted designs and Wald constraints.  Throws UnknownVariable if a
// dropped term is not in the formula.
std::vector<std::size_t> columns_of_terms(const DesignMatrix& full,
                                          const Formula& formula,
                                          const Formula& drop);

// `full` minus the columns of the dropped terms.
DesignMatrix drop_columns(const DesignMatrix& full,
                          const std::vector<std::size_t>& cols);

}  // namespace cmpmu
