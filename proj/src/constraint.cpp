#include "gdoe/constraint.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <sstream>

#include "csv.hpp"
#include "gdoe/error.hpp"

namespace gdoe {

std::string_view to_string(CompareOp op) {
  switch (op) {
    case CompareOp::kGt: return ">";
    case CompareOp::kGe: return ">=";
    case CompareOp::kLt: return "<";
    case CompareOp::kLe: return "<=";
    case CompareOp::kEq: return "==";
    case CompareOp::kNe: return "!=";
  }
  return "?";
}

namespace {

bool is_ordering(CompareOp op) { return op != CompareOp::kEq && op != CompareOp::kNe; }

bool is_ident_start(char ch) {
  return std::isalpha(static_cast<unsigned char>(ch)) || ch == '_';
}

bool is_ident_char(char ch) {
  return std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '.';
}

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() &&
         std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) ==
                  std::tolower(static_cast<unsigned char>(y));
         });
}

class Parser {
 public:
  Parser(std::string_view text, std::span<const FactorSpec> factors)
      : text_(text), factors_(factors) {}

  ConstraintExpr parse() {
    ConstraintExpr expr;
    expr.source = std::string(text_);
    skip_space();
    if (at_end()) throw SyntaxError(pos_, "empty constraint expression");
    expr.clauses.push_back(parse_clause());
    while (true) {
      skip_space();
      if (at_end()) break;
      const std::size_t start = pos_;
      const std::string_view word = read_word();
      if (!iequals(word, "and")) {
        throw SyntaxError(start, "expected 'and' at offset " + std::to_string(start));
      }
      expr.clauses.push_back(parse_clause());
    }
    return expr;
  }

 private:
  bool at_end() const { return pos_ >= text_.size(); }
  char peek() const { return at_end() ? '\0' : text_[pos_]; }

  void skip_space() {
    while (!at_end() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  std::string_view read_word() {
    const std::size_t start = pos_;
    while (!at_end() && is_ident_char(text_[pos_])) ++pos_;
    return text_.substr(start, pos_ - start);
  }

  Clause parse_clause() {
    Clause clause;
    skip_space();
    const std::size_t lhs_pos = pos_;
    clause.lhs = parse_operand();
    skip_space();
    const std::size_t op_pos = pos_;
    clause.op = parse_op();
    skip_space();
    clause.rhs = parse_operand();
    check_types(clause, lhs_pos, op_pos);
    return clause;
  }

  CompareOp parse_op() {
    const std::size_t start = pos_;
    const char first = peek();
    const char second = pos_ + 1 < text_.size() ? text_[pos_ + 1] : '\0';
    auto take = [&](std::size_t n, CompareOp op) {
      pos_ += n;
      return op;
    };
    switch (first) {
      case '>': return second == '=' ? take(2, CompareOp::kGe) : take(1, CompareOp::kGt);
      case '<': return second == '=' ? take(2, CompareOp::kLe) : take(1, CompareOp::kLt);
      case '=':
        if (second == '=') return take(2, CompareOp::kEq);
        break;
      case '!':
        if (second == '=') return take(2, CompareOp::kNe);
        break;
      default: break;
    }
    throw SyntaxError(start, "expected comparison operator at offset " + std::to_string(start));
  }

  Operand parse_operand() {
    const std::size_t start = pos_;
    if (at_end()) throw SyntaxError(start, "expected operand at end of input");
    const char ch = peek();
    Operand operand;
    if (ch == '\'' || ch == '"') {
      ++pos_;
      const std::size_t close = text_.find(ch, pos_);
      if (close == std::string_view::npos) {
        throw SyntaxError(start, "unterminated string literal at offset " + std::to_string(start));
      }
      operand.kind = Operand::Kind::kString;
      operand.text = std::string(text_.substr(pos_, close - pos_));
      pos_ = close + 1;
      return operand;
    }
    if (std::isdigit(static_cast<unsigned char>(ch)) || ch == '-' || ch == '+' || ch == '.') {
      std::size_t end = pos_;
      while (end < text_.size() &&
             (std::isalnum(static_cast<unsigned char>(text_[end])) || text_[end] == '.' ||
              text_[end] == '-' || text_[end] == '+')) {
        ++end;
      }
      double value = 0.0;
      if (!csv::parse_double(text_.substr(pos_, end - pos_), value)) {
        throw SyntaxError(start, "malformed number at offset " + std::to_string(start));
      }
      pos_ = end;
      operand.kind = Operand::Kind::kNumber;
      operand.number = value;
      return operand;
    }
    if (is_ident_start(ch)) {
      const std::string_view word = read_word();
      const auto index = find_factor(factors_, word);
      if (!index) {
        throw Error(ErrorCode::kNameResolution,
                    "unknown factor '" + std::string(word) + "' at offset " + std::to_string(start));
      }
      operand.kind = Operand::Kind::kFactor;
      operand.name = std::string(word);
      operand.factor_index = *index;
      operand.categorical = factors_[*index].is_categorical();
      return operand;
    }
    throw SyntaxError(start, "expected operand at offset " + std::to_string(start));
  }

  void check_types(const Clause& clause, std::size_t lhs_pos, std::size_t op_pos) const {
    using Kind = Operand::Kind;
    const Operand& l = clause.lhs;
    const Operand& r = clause.rhs;
    if (l.kind != Kind::kFactor && r.kind != Kind::kFactor) {
      throw Error(ErrorCode::kValidation,
                  "comparison between two literals at offset " + std::to_string(lhs_pos));
    }
    auto is_text = [](const Operand& o) {
      return o.kind == Kind::kString || (o.kind == Kind::kFactor && o.categorical);
    };
    if (is_text(l) != is_text(r)) {
      throw Error(ErrorCode::kValidation, "comparison between categorical and numeric operands at offset " +
                                              std::to_string(op_pos));
    }
    if (is_text(l) && is_ordering(clause.op)) {
      throw Error(ErrorCode::kValidation, "ordering operator '" + std::string(to_string(clause.op)) +
                                              "' applied to categorical operand at offset " +
                                              std::to_string(op_pos));
    }
  }

  std::string_view text_;
  std::span<const FactorSpec> factors_;
  std::size_t pos_ = 0;
};

std::string operand_text(const Operand& operand) {
  switch (operand.kind) {
    case Operand::Kind::kFactor: return operand.name;
    case Operand::Kind::kNumber: return csv::format_double(operand.number);
    case Operand::Kind::kString: {
      const char quote = operand.text.find('"') == std::string::npos ? '"' : '\'';
      return quote + operand.text + quote;
    }
  }
  return {};
}

template <typename T>
bool compare(const T& a, CompareOp op, const T& b) {
  switch (op) {
    case CompareOp::kGt: return a > b;
    case CompareOp::kGe: return a >= b;
    case CompareOp::kLt: return a < b;
    case CompareOp::kLe: return a <= b;
    case CompareOp::kEq: return a == b;
    case CompareOp::kNe: return a != b;
  }
  return false;
}

template <typename Lookup>
bool evaluate_with(const ConstraintExpr& expr, Lookup&& lookup) {
  auto value_of = [&](const Operand& operand) -> Level {
    switch (operand.kind) {
      case Operand::Kind::kFactor: {
        const Level* value = lookup(operand);
        if (value == nullptr) {
          throw Error(ErrorCode::kEvaluation,
                      "no value supplied for factor '" + operand.name + "'");
        }
        if (std::holds_alternative<std::string>(*value) != operand.categorical) {
          throw Error(ErrorCode::kEvaluation,
                      "value of factor '" + operand.name + "' has the wrong type");
        }
        return *value;
      }
      case Operand::Kind::kNumber: return operand.number;
      case Operand::Kind::kString: return operand.text;
    }
    return 0.0;
  };
  for (const Clause& clause : expr.clauses) {
    const Level lhs = value_of(clause.lhs);
    const Level rhs = value_of(clause.rhs);
    const bool holds = std::holds_alternative<double>(lhs)
                           ? compare(std::get<double>(lhs), clause.op, std::get<double>(rhs))
                           : compare(std::get<std::string>(lhs), clause.op,
                                     std::get<std::string>(rhs));
    if (!holds) return false;
  }
  return true;
}

}  // namespace

std::string ConstraintExpr::to_string() const {
  std::ostringstream out;
  for (std::size_t i = 0; i < clauses.size(); ++i) {
    if (i > 0) out << " and ";
    out << operand_text(clauses[i].lhs) << ' ' << gdoe::to_string(clauses[i].op) << ' '
        << operand_text(clauses[i].rhs);
  }
  return out.str();
}

ConstraintExpr parse_constraint(std::string_view text, std::span<const FactorSpec> factors) {
  return Parser(text, factors).parse();
}

std::vector<ConstraintExpr> parse_constraints(std::span<const std::string> texts,
                                              std::span<const FactorSpec> factors) {
  std::vector<ConstraintExpr> out;
  out.reserve(texts.size());
  for (const auto& text : texts) out.push_back(parse_constraint(text, factors));
  return out;
}

bool evaluate(const ConstraintExpr& expr, std::span<const Level> trial) {
  return evaluate_with(expr, [&](const Operand& operand) -> const Level* {
    return operand.factor_index < trial.size() ? &trial[operand.factor_index] : nullptr;
  });
}

bool evaluate(const ConstraintExpr& expr, const std::map<std::string, Level>& trial) {
  return evaluate_with(expr, [&](const Operand& operand) -> const Level* {
    const auto it = trial.find(operand.name);
    return it == trial.end() ? nullptr : &it->second;
  });
}

}  // namespace gdoe
