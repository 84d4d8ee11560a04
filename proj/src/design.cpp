#include "cmpmu/design.hpp"

#include <algorithm>
#include <set>

#include "cmpmu/errors.hpp"

namespace cmpmu {

namespace {

struct Encoded {
  std::vector<std::string> labels;
  std::vector<Eigen::VectorXd> cols;
};

Encoded encode_variable(const Dataset& ds, const std::string& var,
                        const std::vector<std::size_t>& rows,
                        std::map<std::string, std::string>* refs) {
  const Column& c = ds.require(var);
  const std::size_t n = rows.size();
  Encoded e;
  if (c.numeric) {
    Eigen::VectorXd v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = c.num[rows[i]];
    e.labels.push_back(var);
    e.cols.push_back(std::move(v));
    return e;
  }
  std::set<std::string> levels;
  for (std::size_t i : rows) levels.insert(c.str[i]);
  if (levels.size() < 2) {
    throw DegenerateData("categorical variable " + var +
                         " has a single level on the selected rows");
  }
  auto it = levels.begin();
  (*refs)[var] = *it;  // lexicographically smallest level is the reference
  for (++it; it != levels.end(); ++it) {
    Eigen::VectorXd v(n);
    for (std::size_t i = 0; i < n; ++i) {
      v[i] = (c.str[rows[i]] == *it) ? 1.0 : 0.0;
    }
    e.labels.push_back(var + "(" + *it + ")");
    e.cols.push_back(std::move(v));
  }
  return e;
}

}  // namespace

DesignMatrix build_design(const Dataset& ds, const Formula& f,
                          const std::vector<std::size_t>& rows) {
  if (rows.empty()) throw EmptyData("no complete rows to build a design from");
  const std::size_t n = rows.size();

  DesignMatrix d;
  d.rows = rows;
  std::vector<Eigen::VectorXd> cols;
  cols.emplace_back(Eigen::VectorXd::Ones(n));
  d.labels.push_back("intercept");
  d.term_index.push_back(-1);

  for (std::size_t ti = 0; ti < f.terms.size(); ++ti) {
    const Term& t = f.terms[ti];
    Encoded e;
    switch (t.kind) {
      case Term::Kind::Main:
        e = encode_variable(ds, t.a, rows, &d.reference_levels);
        break;
      case Term::Kind::Square: {
        const Column& c = ds.require(t.a);
        if (!c.numeric) {
          throw ParseError("cannot square categorical variable " + t.a);
        }
        Eigen::VectorXd v(n);
        for (std::size_t i = 0; i < n; ++i) {
          v[i] = c.num[rows[i]] * c.num[rows[i]];
        }
        e.labels.push_back(t.a + "^2");
        e.cols.push_back(std::move(v));
        break;
      }
      case Term::Kind::Interaction: {
        const Encoded ea = encode_variable(ds, t.a, rows, &d.reference_levels);
        const Encoded eb = encode_variable(ds, t.b, rows, &d.reference_levels);
        for (std::size_t i = 0; i < ea.cols.size(); ++i) {
          for (std::size_t j = 0; j < eb.cols.size(); ++j) {
            e.labels.push_back(ea.labels[i] + ":" + eb.labels[j]);
            e.cols.push_back(ea.cols[i].cwiseProduct(eb.cols[j]));
          }
        }
        break;
      }
    }
    for (std::size_t k = 0; k < e.cols.size(); ++k) {
      cols.push_back(std::move(e.cols[k]));
      d.labels.push_back(e.labels[k]);
      d.term_index.push_back(static_cast<int>(ti));
    }
  }

  d.X.resize(n, cols.size());
  for (std::size_t j = 0; j < cols.size(); ++j) d.X.col(j) = cols[j];
  return d;
}

std::vector<std::size_t> columns_of_terms(const DesignMatrix& full,
                                          const Formula& formula,
                                          const Formula& drop) {
  std::vector<std::size_t> out;
  for (const Term& t : drop.terms) {
    const auto it = std::find(formula.terms.begin(), formula.terms.end(), t);
    if (it == formula.terms.end()) {
      throw UnknownVariable("dropped term '" + t.text() +
                            "' is not in the formula");
    }
    const int ti = static_cast<int>(it - formula.terms.begin());
    for (std::size_t j = 0; j < full.term_index.size(); ++j) {
      if (full.term_index[j] == ti) out.push_back(j);
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

DesignMatrix drop_columns(const DesignMatrix& full,
                          const std::vector<std::size_t>& cols) {
  DesignMatrix d;
  d.reference_levels = full.reference_levels;
  d.rows = full.rows;
  std::vector<std::size_t> keep;
  for (std::size_t j = 0; j < static_cast<std::size_t>(full.X.cols()); ++j) {
    if (!std::binary_search(cols.begin(), cols.end(), j)) keep.push_back(j);
  }
  d.X.resize(full.X.rows(), keep.size());
  for (std::size_t k = 0; k < keep.size(); ++k) {
    d.X.col(k) = full.X.col(keep[k]);
    d.labels.push_back(full.labels[keep[k]]);
    d.term_index.push_back(full.term_index[keep[k]]);
  }
  return d;
}

}  // namespace cmpmu
