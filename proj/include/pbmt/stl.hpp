#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pbmt/model.hpp"

namespace pbmt {

// Atomic comparison: `signal op threshold`, or `abs(signal - signal2) op
// threshold` when signal2 is set.
struct StlPredicate {
  std::string signal;
  std::optional<std::string> signal2;
  RelOp op = RelOp::Le;
  double threshold = 0.0;
  bool operator==(const StlPredicate&) const = default;
};

// Closed interval in seconds; missing hi means "to end of trace".
struct StlInterval {
  double lo = 0.0;
  std::optional<double> hi;
  bool operator==(const StlInterval&) const = default;
};

struct StlFormula;
using StlPtr = std::shared_ptr<const StlFormula>;

struct StlFormula {
  enum class Kind { Predicate, Not, And, Or, Always, Eventually, Until, Rise };

  Kind kind = Kind::Predicate;
  StlPredicate pred;    // Predicate, Rise
  StlPtr left, right;   // unary ops use left only
  StlInterval interval; // temporal ops
};

bool operator==(const StlFormula& a, const StlFormula& b);
inline bool operator!=(const StlFormula& a, const StlFormula& b) { return !(a == b); }

StlPtr stl_predicate(StlPredicate pred);
StlPtr stl_not(StlPtr phi);
StlPtr stl_and(StlPtr a, StlPtr b);
StlPtr stl_or(StlPtr a, StlPtr b);
StlPtr stl_always(StlInterval i, StlPtr phi);
StlPtr stl_eventually(StlInterval i, StlPtr phi);
StlPtr stl_until(StlInterval i, StlPtr a, StlPtr b);
StlPtr stl_rise(StlPredicate pred);

// Every atomic predicate in the formula, left to right.
std::vector<const StlPredicate*> collect_predicates(const StlFormula& phi);

// Parses the property language (grammar in docs/stl-format.md). Signal names
// must resolve against `signals`; implication desugars to `not p or q`.
// Throws ParseError (codes SyntaxError, UnknownSignal, BadInterval).
StlPtr parse_stl(const std::string& source, const std::vector<std::string>& signals);

// Convenience overload resolving against the model's named signals (input
// and output block ids).
StlPtr parse_stl(const std::string& source, const Model& model);

StlPtr parse_stl_file(const std::string& path, const Model& model);

// Fully parenthesized canonical text; re-parses to an equal AST.
std::string serialize_stl(const StlFormula& phi);

}  // namespace pbmt
