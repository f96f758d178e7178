#pragma once

// Constraint expressions over raw factor levels.
//
//   expr    := clause ("and" clause)*
//   clause  := operand op operand
//   op      := ">" | ">=" | "<" | "<=" | "==" | "!="
//   operand := factor-name | number | 'text' | "text"
//
// Only conjunctions are supported. The grammar is kept small on purpose;
// disjunction or grouping would slot in above `clause`.

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gdoe/design.hpp"

namespace gdoe {

enum class CompareOp { kGt, kGe, kLt, kLe, kEq, kNe };

std::string_view to_string(CompareOp op);

struct Operand {
  enum class Kind { kFactor, kNumber, kString };

  Kind kind = Kind::kNumber;
  std::string name;  // factor name for kFactor
  std::size_t factor_index = 0;
  bool categorical = false;  // kFactor only
  double number = 0.0;
  std::string text;  // literal text for kString
};

struct Clause {
  Operand lhs;
  CompareOp op = CompareOp::kEq;
  Operand rhs;
};

struct ConstraintExpr {
  std::string source;
  std::vector<Clause> clauses;

  /// Canonical text; parsing it yields an identical clause list.
  std::string to_string() const;
};

/// Parses `text`, resolving factor names against `factors`. Throws
/// SyntaxError (with byte offset), or Error with kNameResolution /
/// kValidation for unknown names and ill-typed comparisons.
ConstraintExpr parse_constraint(std::string_view text, std::span<const FactorSpec> factors);

std::vector<ConstraintExpr> parse_constraints(std::span<const std::string> texts,
                                              std::span<const FactorSpec> factors);

/// True iff every clause holds on `trial` (indexed like the factor list the
/// expression was parsed against). Throws kEvaluation when a referenced
/// value is missing or has the wrong type.
bool evaluate(const ConstraintExpr& expr, std::span<const Level> trial);

/// Same, with values looked up by factor name.
bool evaluate(const ConstraintExpr& expr, const std::map<std::string, Level>& trial);

}  // namespace gdoe
