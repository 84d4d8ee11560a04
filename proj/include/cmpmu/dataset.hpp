#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace cmpmu {

// A typed CSV column.  A column is numeric iff every non-empty field parses
// fully as a decimal number; otherwise it is categorical with the distinct
// observed strings as levels.  Missing entries are NaN (numeric) or ""
// (categorical).
struct Column {
  std::string name;
  bool numeric = false;
  std::vector<double> num;
  std::vector<std::string> str;

  bool missing_at(std::size_t i) const;
};

struct Dataset {
  std::vector<Column> cols;
  std::size_t n_rows = 0;

  const Column* find(const std::string& name) const;
  // Throws UnknownVariable if absent.
  const Column& require(const std::string& name) const;
};

// RFC-4180-style parsing: header row required, quoted fields with ""
// escapes, CRLF tolerated.  Ragged rows raise ParseError with location;
// a header-only file raises EmptyData.
Dataset load_csv(std::istream& in);
Dataset load_csv(const std::string& path);

// Inverse of load_csv: numeric values at 17 significant digits so a write +
// re-read round-trips the typed columns exactly.
void save_csv(const Dataset& ds, std::ostream& out);
void save_csv(const Dataset& ds, const std::string& path);

// Indices of rows with no missing values in any of the named columns.
std::vector<std::size_t> complete_rows(const Dataset& ds,
                                       const std::vector<std::string>& vars);

// Extract a count response: numeric, nonnegative, integral.
std::vector<std::int64_t> extract_counts(const Dataset& ds,
                                         const std::string& name,
                                         const std::vector<std::size_t>& rows);

}  // namespace cmpmu
