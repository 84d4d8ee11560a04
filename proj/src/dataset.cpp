#include "cmpmu/dataset.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "cmpmu/errors.hpp"

namespace cmpmu {

namespace {

struct RawField {
  std::string text;
  bool quoted = false;
};

// Character-level CSV reader; handles quoted fields (with "" escapes and
// embedded newlines/commas), CRLF line endings, and a UTF-8 BOM.
std::vector<std::vector<RawField>> read_rows(std::istream& in) {
  std::vector<std::vector<RawField>> rows;
  std::vector<RawField> row;
  RawField field;
  bool in_quotes = false;
  bool row_has_content = false;

  auto end_field = [&] {
    if (!field.quoted) {
      // Trim surrounding whitespace of unquoted fields.
      const auto b = field.text.find_first_not_of(" \t");
      if (b == std::string::npos) {
        field.text.clear();
      } else {
        const auto e = field.text.find_last_not_of(" \t");
        field.text = field.text.substr(b, e - b + 1);
      }
    }
    row.push_back(std::move(field));
    field = RawField{};
  };
  auto end_row = [&] {
    end_field();
    rows.push_back(std::move(row));
    row.clear();
    row_has_content = false;
  };

  int c;
  bool first_char = true;
  while ((c = in.get()) != std::char_traits<char>::eof()) {
    char ch = static_cast<char>(c);
    if (first_char) {
      first_char = false;
      // Strip a UTF-8 BOM.
      if (static_cast<unsigned char>(ch) == 0xEF) {
        in.get();
        in.get();
        continue;
      }
    }
    if (in_quotes) {
      if (ch == '"') {
        if (in.peek() == '"') {
          field.text += '"';
          in.get();
        } else {
          in_quotes = false;
        }
      } else {
        field.text += ch;
      }
      continue;
    }
    switch (ch) {
      case '"':
        if (field.text.empty() && !field.quoted) {
          in_quotes = true;
          field.quoted = true;
        } else {
          field.text += ch;  // interior quote in an unquoted field
        }
        row_has_content = true;
        break;
      case ',':
        end_field();
        row_has_content = true;
        break;
      case '\r':
        break;
      case '\n':
        if (row_has_content || !row.empty()) end_row();
        break;
      default:
        field.text += ch;
        row_has_content = true;
        break;
    }
  }
  if (in_quotes) {
    throw ParseError("unterminated quoted field at end of input",
                     rows.size() + 1, row.size() + 1);
  }
  if (row_has_content || !row.empty()) end_row();
  return rows;
}

bool parse_number(const std::string& s, double* out) {
  if (s.empty()) return false;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size()) return false;
  *out = v;
  return true;
}

}  // namespace

bool Column::missing_at(std::size_t i) const {
  return numeric ? std::isnan(num[i]) : str[i].empty();
}

const Column* Dataset::find(const std::string& name) const {
  for (const Column& c : cols) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

const Column& Dataset::require(const std::string& name) const {
  const Column* c = find(name);
  if (!c) throw UnknownVariable("unknown column: " + name);
  return *c;
}

Dataset load_csv(std::istream& in) {
  const auto rows = read_rows(in);
  if (rows.empty()) throw EmptyData("empty input: no header row");
  const std::size_t ncol = rows[0].size();
  std::set<std::string> seen;
  for (std::size_t j = 0; j < ncol; ++j) {
    const std::string& name = rows[0][j].text;
    if (name.empty()) throw ParseError("empty column name in header", 1, j + 1);
    if (!seen.insert(name).second) {
      throw ParseError("duplicate column name in header: " + name, 1, j + 1);
    }
  }
  if (rows.size() == 1) throw EmptyData("no data rows after header");
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() != ncol) {
      throw ParseError("row has " + std::to_string(rows[i].size()) +
                           " fields, expected " + std::to_string(ncol),
                       i + 1, rows[i].size());
    }
  }

  Dataset ds;
  ds.n_rows = rows.size() - 1;
  ds.cols.resize(ncol);
  for (std::size_t j = 0; j < ncol; ++j) {
    Column& col = ds.cols[j];
    col.name = rows[0][j].text;
    bool numeric = true;
    double v = 0.0;
    for (std::size_t i = 1; i < rows.size() && numeric; ++i) {
      const std::string& f = rows[i][j].text;
      if (!f.empty() && !parse_number(f, &v)) numeric = false;
    }
    col.numeric = numeric;
    if (numeric) {
      col.num.resize(ds.n_rows);
      for (std::size_t i = 1; i < rows.size(); ++i) {
        const std::string& f = rows[i][j].text;
        if (f.empty() || !parse_number(f, &v)) {
          v = std::numeric_limits<double>::quiet_NaN();
        }
        col.num[i - 1] = v;
      }
    } else {
      col.str.resize(ds.n_rows);
      for (std::size_t i = 1; i < rows.size(); ++i) {
        col.str[i - 1] = rows[i][j].text;
      }
    }
  }
  return ds;
}

Dataset load_csv(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open file: " + path);
  return load_csv(f);
}

namespace {

void write_field(std::ostream& out, const std::string& s) {
  const bool quote = s.find_first_of(",\"\n\r") != std::string::npos ||
                     (!s.empty() && (s.front() == ' ' || s.back() == ' '));
  if (!quote) {
    out << s;
    return;
  }
  out << '"';
  for (char c : s) {
    if (c == '"') out << '"';
    out << c;
  }
  out << '"';
}

}  // namespace

void save_csv(const Dataset& ds, std::ostream& out) {
  for (std::size_t j = 0; j < ds.cols.size(); ++j) {
    if (j) out << ',';
    write_field(out, ds.cols[j].name);
  }
  out << '\n';
  char buf[40];
  for (std::size_t i = 0; i < ds.n_rows; ++i) {
    for (std::size_t j = 0; j < ds.cols.size(); ++j) {
      if (j) out << ',';
      const Column& c = ds.cols[j];
      if (c.numeric) {
        if (!std::isnan(c.num[i])) {
          std::snprintf(buf, sizeof buf, "%.17g", c.num[i]);
          out << buf;
        }
      } else {
        write_field(out, c.str[i]);
      }
    }
    out << '\n';
  }
}

void save_csv(const Dataset& ds, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open file for writing: " + path);
  save_csv(ds, f);
}

std::vector<std::size_t> complete_rows(const Dataset& ds,
                                       const std::vector<std::string>& vars) {
  std::vector<const Column*> cols;
  cols.reserve(vars.size());
  for (const std::string& v : vars) cols.push_back(&ds.require(v));
  std::vector<std::size_t> rows;
  rows.reserve(ds.n_rows);
  for (std::size_t i = 0; i < ds.n_rows; ++i) {
    bool ok = true;
    for (const Column* c : cols) {
      if (c->missing_at(i)) {
        ok = false;
        break;
      }
    }
    if (ok) rows.push_back(i);
  }
  return rows;
}

std::vector<std::int64_t> extract_counts(const Dataset& ds,
                                         const std::string& name,
                                         const std::vector<std::size_t>& rows) {
  const Column& c = ds.require(name);
  if (!c.numeric) {
    throw Error("response column must be numeric: " + name);
  }
  std::vector<std::int64_t> y;
  y.reserve(rows.size());
  for (std::size_t i : rows) {
    const double v = c.num[i];
    const double r = std::round(v);
    if (std::isnan(v) || v < 0.0 || std::fabs(v - r) > 1e-9) {
      throw Error("response column " + name +
                  " must contain nonnegative integer counts");
    }
    y.push_back(static_cast<std::int64_t>(r));
  }
  return y;
}

}  // namespace cmpmu
