// Tests for CSV parsing/writing, formula parsing, and design construction.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <sstream>

#include "cmpmu/dataset.hpp"
#include "cmpmu/design.hpp"
#include "cmpmu/errors.hpp"
#include "cmpmu/formula.hpp"
#include "doctest.h"

using namespace cmpmu;

TEST_CASE("csv parsing types columns and handles quoting") {
  std::istringstream in(
      "\xEF\xBB\xBFid,name,score,count\r\n"
      "1,\"Alice, A.\",3.5,2\r\n"
      "2,\"line\nbreak\",,3\r\n"
      "3,\"He said \"\"hi\"\"\",-1e-2,0\r\n");
  Dataset ds = load_csv(in);
  REQUIRE(ds.cols.size() == 4);
  CHECK(ds.n_rows == 3);
  CHECK(ds.cols[0].name == "id");  // BOM stripped from the first header
  CHECK(ds.cols[0].numeric);
  CHECK(ds.cols[0].num[2] == 3.0);

  const Column& name = ds.cols[1];
  CHECK_FALSE(name.numeric);
  CHECK(name.str[0] == "Alice, A.");
  CHECK(name.str[1] == "line\nbreak");
  CHECK(name.str[2] == "He said \"hi\"");

  const Column& score = ds.cols[2];
  CHECK(score.numeric);
  CHECK(score.num[0] == 3.5);
  CHECK(std::isnan(score.num[1]));
  CHECK(score.missing_at(1));
  CHECK_FALSE(score.missing_at(0));
  CHECK(score.num[2] == -1e-2);
}

TEST_CASE("csv with unquoted spaces trims and types by full consumption") {
  std::istringstream in(
      "a, b ,c\n"
      " 1 , hello ,2.5e3\n"
      "2, world ,  -4 \n");
  Dataset ds = load_csv(in);
  CHECK(ds.cols[1].name == "b");
  CHECK(ds.cols[0].numeric);
  CHECK(ds.cols[0].num[0] == 1.0);
  CHECK(ds.cols[1].str[1] == "world");
  CHECK(ds.cols[2].numeric);
  CHECK(ds.cols[2].num[0] == 2500.0);
  CHECK(ds.cols[2].num[1] == -4.0);
}

TEST_CASE("csv mixed column falls back to categorical") {
  std::istringstream in("v\n1\nx2\n3\n");
  Dataset ds = load_csv(in);
  CHECK_FALSE(ds.cols[0].numeric);
  CHECK(ds.cols[0].str[1] == "x2");
}

TEST_CASE("csv save then load round-trips typed columns exactly") {
  std::istringstream in(
      "y,x,g\n"
      "0,0.1,A\n"
      "2,,B line\n"
      "3,2.5000000000000004,\"q,\"\"z\"\"\"\n");
  Dataset ds = load_csv(in);
  std::ostringstream out;
  save_csv(ds, out);
  std::istringstream back(out.str());
  Dataset ds2 = load_csv(back);
  REQUIRE(ds2.cols.size() == ds.cols.size());
  CHECK(ds2.n_rows == ds.n_rows);
  for (std::size_t j = 0; j < ds.cols.size(); ++j) {
    CHECK(ds2.cols[j].name == ds.cols[j].name);
    CHECK(ds2.cols[j].numeric == ds.cols[j].numeric);
    for (std::size_t i = 0; i < ds.n_rows; ++i) {
      if (ds.cols[j].numeric) {
        if (ds.cols[j].missing_at(i)) {
          CHECK(ds2.cols[j].missing_at(i));
        } else {
          CHECK(ds2.cols[j].num[i] == ds.cols[j].num[i]);
        }
      } else {
        CHECK(ds2.cols[j].str[i] == ds.cols[j].str[i]);
      }
    }
  }
}

TEST_CASE("csv structural errors carry locations") {
  SUBCASE("ragged row") {
    std::istringstream in("a,b\n1,2\n1,2,3\n");
    try {
      load_csv(in);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.row == 3);
    }
  }
  SUBCASE("unterminated quote") {
    std::istringstream in("a\n\"oops\n");
    CHECK_THROWS_AS(load_csv(in), ParseError);
  }
  SUBCASE("duplicate header") {
    std::istringstream in("a,a\n1,2\n");
    CHECK_THROWS_AS(load_csv(in), ParseError);
  }
  SUBCASE("empty header name") {
    std::istringstream in("a,,c\n1,2,3\n");
    CHECK_THROWS_AS(load_csv(in), ParseError);
  }
  SUBCASE("header only") {
    std::istringstream in("a,b\n");
    CHECK_THROWS_AS(load_csv(in), EmptyData);
  }
  SUBCASE("empty stream") {
    std::istringstream in("");
    CHECK_THROWS_AS(load_csv(in), EmptyData);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_csv("/nonexistent/nowhere.csv"), Error);
  }
}

TEST_CASE("complete_rows and count extraction") {
  std::istringstream in(
      "y,x,g\n"
      "0,1.5,A\n"
      "2,,B\n"
      "3,2.5,A\n"
      "4,3.0,\n");
  Dataset ds = load_csv(in);

  const auto all = complete_rows(ds, {"y"});
  CHECK(all == std::vector<std::size_t>{0, 1, 2, 3});
  const auto both = complete_rows(ds, {"y", "x", "g"});
  CHECK(both == std::vector<std::size_t>{0, 2});

  const auto y = extract_counts(ds, "y", both);
  CHECK(y == std::vector<std::int64_t>{0, 3});

  CHECK_THROWS_AS(extract_counts(ds, "x", both), Error);   // non-integral
  CHECK_THROWS_AS(extract_counts(ds, "g", both), Error);   // not numeric
  CHECK_THROWS_AS(extract_counts(ds, "nope", both), UnknownVariable);

  std::istringstream neg("y\n-1\n2\n");
  Dataset dneg = load_csv(neg);
  CHECK_THROWS_AS(extract_counts(dneg, "y", complete_rows(dneg, {"y"})),
                  Error);
}

TEST_CASE("formula grammar") {
  const Formula f = Formula::parse(" x + g + x:g + x^2 ");
  REQUIRE(f.terms.size() == 4);
  CHECK(f.terms[0] == Term{Term::Kind::Main, "x", ""});
  CHECK(f.terms[1] == Term{Term::Kind::Main, "g", ""});
  CHECK(f.terms[2] == Term{Term::Kind::Interaction, "x", "g"});
  CHECK(f.terms[3] == Term{Term::Kind::Square, "x", ""});
  CHECK(f.variables() == std::vector<std::string>{"x", "g"});
  CHECK(f.text() == "x + g + x:g + x^2");
  // text() output reparses to the same formula
  CHECK(Formula::parse(f.text()).terms == f.terms);

  CHECK(Formula::parse("").terms.empty());
  CHECK(Formula::parse("  ").terms.empty());

  CHECK_THROWS_AS(Formula::parse("x + x"), ParseError);
  CHECK_THROWS_AS(Formula::parse("x:x"), ParseError);
  CHECK_THROWS_AS(Formula::parse("x +"), ParseError);
  CHECK_THROWS_AS(Formula::parse("x:"), ParseError);
  CHECK_THROWS_AS(Formula::parse("^2"), ParseError);
  CHECK_THROWS_AS(Formula::parse("a b"), ParseError);
}

TEST_CASE("design matrix encodes terms with reference levels") {
  std::istringstream in(
      "y,g,x\n"
      "1,B,1.0\n"
      "4,A,2.0\n"
      "2,B,0.5\n"
      "3,C,1.5\n"
      "5,A,3.0\n");
  Dataset ds = load_csv(in);
  const auto rows = complete_rows(ds, {"y", "g", "x"});
  const Formula f = Formula::parse("g + x + g:x + x^2");
  const DesignMatrix d = build_design(ds, f, rows);

  const std::vector<std::string> want_labels{
      "intercept", "g(B)", "g(C)", "x", "g(B):x", "g(C):x", "x^2"};
  CHECK(d.labels == want_labels);
  CHECK(d.term_index == std::vector<int>{-1, 0, 0, 1, 2, 2, 3});
  REQUIRE(d.reference_levels.count("g") == 1);
  CHECK(d.reference_levels.at("g") == "A");

  REQUIRE(d.X.rows() == 5);
  REQUIRE(d.X.cols() == 7);
  // row 0: g=B, x=1.0
  CHECK(d.X(0, 0) == 1.0);
  CHECK(d.X(0, 1) == 1.0);
  CHECK(d.X(0, 2) == 0.0);
  CHECK(d.X(0, 3) == 1.0);
  CHECK(d.X(0, 4) == 1.0);
  CHECK(d.X(0, 5) == 0.0);
  CHECK(d.X(0, 6) == 1.0);
  // row 3: g=C, x=1.5
  CHECK(d.X(3, 1) == 0.0);
  CHECK(d.X(3, 2) == 1.0);
  CHECK(d.X(3, 4) == 0.0);
  CHECK(d.X(3, 5) == 1.5);
  CHECK(d.X(3, 6) == 2.25);
  // row 1: g=A (reference), x=2.0
  CHECK(d.X(1, 1) == 0.0);
  CHECK(d.X(1, 2) == 0.0);
  CHECK(d.X(1, 6) == 4.0);

  SUBCASE("columns_of_terms and drop_columns") {
    const auto ix = columns_of_terms(d, f, Formula::parse("g:x"));
    CHECK(ix == std::vector<std::size_t>{4, 5});
    const DesignMatrix r = drop_columns(d, ix);
    CHECK(r.labels == std::vector<std::string>{"intercept", "g(B)", "g(C)",
                                               "x", "x^2"});
    CHECK(r.X.cols() == 5);
    CHECK(r.X(3, 4) == 2.25);

    const auto gx = columns_of_terms(d, f, Formula::parse("g + x"));
    CHECK(gx == std::vector<std::size_t>{1, 2, 3});
    CHECK_THROWS_AS(columns_of_terms(d, f, Formula::parse("z")),
                    UnknownVariable);
  }

  SUBCASE("intercept-only design") {
    const DesignMatrix d0 = build_design(ds, Formula::parse(""), rows);
    CHECK(d0.X.cols() == 1);
    CHECK(d0.X.col(0).minCoeff() == 1.0);
    CHECK(d0.labels == std::vector<std::string>{"intercept"});
  }
}

TEST_CASE("design rejects degenerate or ill-typed terms") {
  std::istringstream in("y,g,x\n1,A,1\n2,A,2\n3,A,3\n");
  Dataset ds = load_csv(in);
  const auto rows = complete_rows(ds, {"y", "g", "x"});
  CHECK_THROWS_AS(build_design(ds, Formula::parse("g"), rows), DegenerateData);
  CHECK_THROWS_AS(build_design(ds, Formula::parse("q"), rows),
                  UnknownVariable);
  std::istringstream in3("y,g\n1,A\n2,B\n3,A\n");
  Dataset ds3 = load_csv(in3);
  CHECK_THROWS_AS(
      build_design(ds3, Formula::parse("g^2"), complete_rows(ds3, {"g"})),
      ParseError);
  CHECK_THROWS_AS(build_design(ds, Formula::parse("x"), {}), EmptyData);
}
