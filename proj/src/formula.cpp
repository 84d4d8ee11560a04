#include "cmpmu/formula.hpp"

#include <algorithm>

#include "cmpmu/errors.hpp"

namespace cmpmu {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

void check_name(const std::string& name, const std::string& term) {
  if (name.empty() || name.find_first_of("+:^ \t") != std::string::npos) {
    throw ParseError("invalid variable name in term '" + term + "'");
  }
}

}  // namespace

std::string Term::text() const {
  switch (kind) {
    case Kind::Main:
      return a;
    case Kind::Interaction:
      return a + ":" + b;
    case Kind::Square:
      return a + "^2";
  }
  return a;
}

std::vector<std::string> Formula::variables() const {
  std::vector<std::string> out;
  auto add = [&](const std::string& v) {
    if (std::find(out.begin(), out.end(), v) == out.end()) out.push_back(v);
  };
  for (const Term& t : terms) {
    add(t.a);
    if (t.kind == Term::Kind::Interaction) add(t.b);
  }
  return out;
}

std::string Formula::text() const {
  std::string s;
  for (const Term& t : terms) {
    if (!s.empty()) s += " + ";
    s += t.text();
  }
  return s;
}

Formula Formula::parse(const std::string& s) {
  Formula f;
  if (trim(s).empty()) return f;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    const std::size_t next = s.find('+', pos);
    const std::string piece =
        trim(s.substr(pos, next == std::string::npos ? next : next - pos));
    if (piece.empty()) throw ParseError("empty term in formula: '" + s + "'");

    Term t;
    const std::size_t colon = piece.find(':');
    if (colon != std::string::npos) {
      t.kind = Term::Kind::Interaction;
      t.a = trim(piece.substr(0, colon));
      t.b = trim(piece.substr(colon + 1));
      check_name(t.a, piece);
      check_name(t.b, piece);
      if (t.a == t.b) {
        throw ParseError("self-interaction '" + piece +
                         "'; use '" + t.a + "^2' for a square");
      }
    } else if (piece.size() > 2 && piece.substr(piece.size() - 2) == "^2") {
      t.kind = Term::Kind::Square;
      t.a = trim(piece.substr(0, piece.size() - 2));
      check_name(t.a, piece);
    } else {
      t.kind = Term::Kind::Main;
      t.a = piece;
      check_name(t.a, piece);
    }
    if (std::find(f.terms.begin(), f.terms.end(), t) != f.terms.end()) {
      throw ParseError("duplicate term '" + t.text() + "' in formula");
    }
    f.terms.push_back(std::move(t));
    if (next == std::string::npos) break;
    pos = next + 1;
  }
  return f;
}

}  // namespace cmpmu
