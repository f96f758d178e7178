#include <doctest.h>

#include <map>
#include <random>
#include <sstream>

#include "gdoe/constraint.hpp"
#include "gdoe/design.hpp"
#include "gdoe/error.hpp"
#include "gdoe/presets.hpp"

using namespace gdoe;

namespace {

const std::vector<FactorSpec>& cnn() {
  static const auto factors = presets::cnn_factors();
  return factors;
}

Trial trial_with(std::map<std::string, Level> values) {
  Trial t;
  for (const auto& f : cnn()) t.push_back(values.count(f.name) ? values[f.name] : f.levels[0]);
  return t;
}

std::size_t syntax_offset(std::string_view text) {
  try {
    parse_constraint(text, cnn());
  } catch (const SyntaxError& e) {
    return e.offset();
  }
  FAIL("expected syntax error for " << text);
  return 0;
}

ErrorCode code_of(std::string_view text) {
  try {
    parse_constraint(text, cnn());
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected error for " << text);
  return ErrorCode::kValidation;
}

// Independent reference: one clause as (lhs, op, rhs) strings, evaluated by
// direct comparison on the raw trial.
struct RefClause {
  std::string lhs, op, rhs;
};

Level ref_value(const std::string& token, const Trial& trial) {
  for (std::size_t f = 0; f < cnn().size(); ++f)
    if (cnn()[f].name == token) return trial[f];
  if (token.front() == '\'') return token.substr(1, token.size() - 2);
  return std::stod(token);
}

bool ref_eval(const std::vector<RefClause>& clauses, const Trial& trial) {
  for (const auto& c : clauses) {
    const Level a = ref_value(c.lhs, trial), b = ref_value(c.rhs, trial);
    bool ok;
    if (c.op == "==") ok = a == b;
    else if (c.op == "!=") ok = a != b;
    else {
      const double x = std::get<double>(a), y = std::get<double>(b);
      if (c.op == ">") ok = x > y;
      else if (c.op == ">=") ok = x >= y;
      else if (c.op == "<") ok = x < y;
      else ok = x <= y;
    }
    if (!ok) return false;
  }
  return true;
}

std::string format_number(double v) {
  std::ostringstream out;
  out << v;
  return out.str();
}

}  // namespace

TEST_CASE("parse examples") {
  const auto e = parse_constraint("n1 > n2", cnn());
  REQUIRE(e.clauses.size() == 1);
  CHECK(e.clauses[0].lhs.kind == Operand::Kind::kFactor);
  CHECK(e.clauses[0].rhs.kind == Operand::Kind::kFactor);
  CHECK(e.clauses[0].lhs.name == "n1");
  CHECK(e.clauses[0].rhs.name == "n2");
  CHECK(e.clauses[0].op == CompareOp::kGt);

  CHECK(parse_constraint("k1 >= k2 and n1 > n2", cnn()).clauses.size() == 2);
  CHECK(parse_constraint("  k1>=k2   AND n1>n2 ", cnn()).clauses.size() == 2);
  CHECK(parse_constraint("a1 == 'relu' and a2 != \"tanh\"", cnn()).clauses.size() == 2);
  CHECK(parse_constraint("d <= 0.5", cnn()).clauses[0].rhs.number == 0.5);
}

TEST_CASE("parse errors") {
  CHECK(syntax_offset("n1 >>") == 4);
  CHECK(syntax_offset("") == 0);
  CHECK(syntax_offset("n1 > n2 or k1 > k2") == 8);
  CHECK(syntax_offset("n1 > 'abc") == 5);
  CHECK(syntax_offset("n1 >") == 4);
  CHECK(code_of("q > n2") == ErrorCode::kNameResolution);
  CHECK(code_of("a1 > a2") == ErrorCode::kValidation);
  CHECK(code_of("1 < 2") == ErrorCode::kValidation);
  CHECK(code_of("a1 == 3") == ErrorCode::kValidation);
  CHECK(code_of("n1 >>") == ErrorCode::kSyntax);
}

TEST_CASE("evaluate examples") {
  const auto gt = parse_constraint("n1 > n2", cnn());
  const auto ge = parse_constraint("k1 >= k2", cnn());
  CHECK(evaluate(gt, trial_with({{"n1", 32.0}, {"n2", 8.0}})));
  CHECK(evaluate(ge, trial_with({{"k1", 5.0}, {"k2", 5.0}})));
  CHECK_FALSE(evaluate(gt, trial_with({{"n1", 8.0}, {"n2", 2048.0}})));

  std::map<std::string, Level> named{{"n1", 32.0}, {"n2", 8.0}};
  CHECK(evaluate(gt, named));
  std::map<std::string, Level> missing{{"n1", 32.0}};
  try {
    evaluate(gt, missing);
    FAIL("missing value accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kEvaluation);
  }
}

TEST_CASE("pretty print round trip") {
  const std::vector<std::string> texts{"n1 > n2", "k1 >= k2 and n1 > n2", "a1 == 'relu'",
                                       "d < 0.375 AND p1 != p2", "8 < n1", "a2 != \"tanh\""};
  for (const auto& text : texts) {
    const auto first = parse_constraint(text, cnn());
    const auto printed = first.to_string();
    const auto second = parse_constraint(printed, cnn());
    CHECK(second.to_string() == printed);
    REQUIRE(second.clauses.size() == first.clauses.size());
    for (std::size_t i = 0; i < first.clauses.size(); ++i) {
      CHECK(second.clauses[i].op == first.clauses[i].op);
      CHECK(second.clauses[i].lhs.name == first.clauses[i].lhs.name);
      CHECK(second.clauses[i].rhs.number == first.clauses[i].rhs.number);
      CHECK(second.clauses[i].rhs.text == first.clauses[i].rhs.text);
    }
  }
}

TEST_CASE("evaluate agrees with a reference interpreter") {
  std::mt19937_64 rng(2024);
  const std::vector<std::string> ordering{">", ">=", "<", "<=", "==", "!="};
  const auto& factors = cnn();
  auto pick = [&](std::size_t n) { return static_cast<std::size_t>(rng() % n); };

  std::vector<std::size_t> numeric, categorical;
  for (std::size_t f = 0; f < factors.size(); ++f)
    (factors[f].is_categorical() ? categorical : numeric).push_back(f);

  for (int rep = 0; rep < 1000; ++rep) {
    std::vector<RefClause> ref;
    std::string text;
    const std::size_t n = 1 + pick(3);
    for (std::size_t c = 0; c < n; ++c) {
      RefClause clause;
      if (pick(4) == 0) {
        const auto& f = factors[categorical[pick(categorical.size())]];
        clause.lhs = f.name;
        clause.op = pick(2) ? "==" : "!=";
        clause.rhs = pick(2) ? factors[categorical[pick(categorical.size())]].name
                             : "'" + std::get<std::string>(f.levels[pick(f.level_count())]) + "'";
      } else {
        const auto& f = factors[numeric[pick(numeric.size())]];
        clause.lhs = f.name;
        clause.op = ordering[pick(ordering.size())];
        if (pick(2)) {
          clause.rhs = factors[numeric[pick(numeric.size())]].name;
        } else {
          clause.rhs = format_number(f.numeric_level(pick(f.level_count())));
        }
      }
      if (pick(3) == 0) std::swap(clause.lhs, clause.rhs);
      if (!text.empty()) text += pick(2) ? " and " : " AND ";
      text += clause.lhs + " " + clause.op + " " + clause.rhs;
      ref.push_back(clause);
    }
    const auto expr = parse_constraint(text, factors);
    for (int t = 0; t < 5; ++t) {
      Trial trial;
      for (const auto& f : factors) trial.push_back(f.levels[pick(f.level_count())]);
      CHECK_MESSAGE(evaluate(expr, trial) == ref_eval(ref, trial), text);
    }
  }
}

TEST_CASE("constrained cnn space has 1920 trials") {
  const auto full = build_full_factorial(cnn());
  const auto constraints = parse_constraints(presets::cnn_constraints(), cnn());
  std::size_t kept = 0;
  for (const auto& t : full.trials) {
    bool ok = true;
    for (const auto& c : constraints) ok = ok && evaluate(c, t);
    kept += ok;
  }
  CHECK(kept == 1920);
}
