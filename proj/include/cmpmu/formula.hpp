#pragma once

#include <string>
#include <vector>

namespace cmpmu {

// Formula-lite grammar: terms joined by '+', where a term is a variable
// name, an interaction `a:b`, or the square `x^2` of a numeric variable.
struct Term {
  enum class Kind { Main, Interaction, Square };
  Kind kind = Kind::Main;
  std::string a;
  std::string b;  // interaction partner, empty otherwise

  std::string text() const;
  bool operator==(const Term& o) const {
    return kind == o.kind && a == o.a && b == o.b;
  }
};

struct Formula {
  std::vector<Term> terms;

  // Unique variable names in first-appearance order.
  std::vector<std::string> variables() const;
  std::string text() const;

  // Parses e.g. "gender + program + math + gender:program + size^2".
  // The empty string yields an intercept-only formula.
  static Formula parse(const std::string& s);
};

}  // namespace cmpmu
