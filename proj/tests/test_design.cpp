#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "gdoe/constraint.hpp"
#include "gdoe/design.hpp"
#include "gdoe/error.hpp"
#include "gdoe/presets.hpp"

using namespace gdoe;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected gdoe::Error");
  return ErrorCode::kValidation;
}

Design cnn_constrained() {
  const auto factors = presets::cnn_factors();
  const auto full = build_full_factorial(factors);
  const auto texts = presets::cnn_constraints();
  return filter_by_constraints(full, parse_constraints(texts, factors));
}

std::size_t n1_index(const ColumnMap& map) { return map.blocks[0].offset; }

}  // namespace

TEST_CASE("cnn space counts") {
  const auto factors = presets::cnn_factors();
  REQUIRE(factors.size() == 9);
  const auto full = build_full_factorial(factors);
  CHECK(full.size() == 7200);

  // Brute-force the fraction of level pairs satisfying each constraint.
  const auto& n1 = factors[0];
  const auto& n2 = factors[4];
  const auto& k1 = factors[1];
  const auto& k2 = factors[5];
  std::size_t n_ok = 0, k_ok = 0;
  for (std::size_t a = 0; a < n1.level_count(); ++a)
    for (std::size_t b = 0; b < n2.level_count(); ++b)
      n_ok += n1.numeric_level(a) > n2.numeric_level(b);
  for (std::size_t a = 0; a < k1.level_count(); ++a)
    for (std::size_t b = 0; b < k2.level_count(); ++b)
      k_ok += k1.numeric_level(a) >= k2.numeric_level(b);
  CHECK(n_ok == 10);
  CHECK(k_ok == 6);
  const std::size_t oracle = 7200 * n_ok * k_ok /
                             (n1.level_count() * n2.level_count() * k1.level_count() *
                              k2.level_count());
  const auto constrained = cnn_constrained();
  CHECK(constrained.size() == 1920);
  CHECK(constrained.size() == oracle);
}

TEST_CASE("full factorial order and ids") {
  const auto d = build_full_factorial(presets::two_level_factors(2));
  REQUIRE(d.size() == 4);
  CHECK(std::get<double>(d.trials[0][0]) == -1);
  CHECK(std::get<double>(d.trials[0][1]) == -1);
  CHECK(std::get<double>(d.trials[1][1]) == 1);
  CHECK(std::get<double>(d.trials[2][0]) == 1);
  for (std::size_t i = 0; i < d.size(); ++i) CHECK(d.trial_ids[i] == std::int64_t(i));
}

TEST_CASE("full factorial size equals product of level counts") {
  std::mt19937_64 rng(11);
  for (int rep = 0; rep < 50; ++rep) {
    const int nf = 1 + int(rng() % 5);
    std::vector<FactorSpec> factors;
    std::size_t product = 1;
    for (int f = 0; f < nf; ++f) {
      const int nl = 2 + int(rng() % 4);
      product *= nl;
      if (rng() % 2) {
        std::vector<double> levels;
        for (int l = 0; l < nl; ++l) levels.push_back(1.0 + l);
        factors.push_back(FactorSpec::numeric("x" + std::to_string(f), levels));
      } else {
        std::vector<std::string> levels;
        for (int l = 0; l < nl; ++l) levels.push_back("c" + std::to_string(l));
        factors.push_back(FactorSpec::categorical("x" + std::to_string(f), levels));
      }
    }
    CHECK(build_full_factorial(factors).size() == product);
  }
}

TEST_CASE("enumeration cap and validation errors") {
  const auto factors = presets::cnn_factors();
  CHECK(code_of([&] { build_full_factorial(factors, 1000); }) == ErrorCode::kSize);
  CHECK(code_of([] { build_full_factorial({}); }) == ErrorCode::kValidation);
  auto dup = presets::two_level_factors(2);
  dup[1].name = dup[0].name;
  CHECK(code_of([&] { build_full_factorial(dup); }) == ErrorCode::kValidation);
  auto repeated = FactorSpec::numeric("x", {1, 1});
  CHECK(code_of([&] { repeated.validate(); }) == ErrorCode::kValidation);
  auto bad_log = FactorSpec::numeric("x", {0, 1}, Transform::kLog10);
  CHECK(code_of([&] { bad_log.validate(); }) == ErrorCode::kValidation);
}

TEST_CASE("filter is idempotent and vacuous filter keeps the design") {
  const auto factors = presets::cnn_factors();
  const auto full = build_full_factorial(factors);
  const auto constraints = parse_constraints(presets::cnn_constraints(), factors);
  const auto once = filter_by_constraints(full, constraints);
  const auto twice = filter_by_constraints(once, constraints);
  CHECK(once.trials == twice.trials);
  CHECK(once.trial_ids == twice.trial_ids);
  const auto none = filter_by_constraints(full, {});
  CHECK(none.trials == full.trials);
  CHECK(none.trial_ids == full.trial_ids);
}

TEST_CASE("unknown factor in constraint") {
  const auto factors = presets::cnn_factors();
  CHECK(code_of([&] { parse_constraint("n3 > n2", factors); }) == ErrorCode::kNameResolution);
}

TEST_CASE("encode examples") {
  const auto factors = presets::cnn_factors();
  const auto map = ColumnMap::from_factors(factors);
  CHECK(map.width() == 9);
  const auto& n1 = factors[0];
  CHECK(n1.levels == std::vector<Level>{8.0, 32.0, 128.0, 512.0, 2048.0});

  Design d;
  d.factors = factors;
  d.trials = build_full_factorial(factors).trials;
  const auto enc = encode_design(d);
  CHECK(enc.rows.minCoeff() >= 0.0);
  CHECK(enc.rows.maxCoeff() <= 1.0);

  const auto col = n1_index(enc.column_map);
  for (Eigen::Index r = 0; r < enc.rows.rows(); ++r) {
    const double raw = std::get<double>(d.trials[r][0]);
    const double expect = (std::log10(raw) - std::log10(8.0)) /
                          (std::log10(2048.0) - std::log10(8.0));
    CHECK(enc.rows(r, col) == doctest::Approx(expect).epsilon(1e-14));
    if (raw == 8) CHECK(enc.rows(r, col) == 0.0);
    if (raw == 2048) CHECK(enc.rows(r, col) == 1.0);
    if (raw == 128) CHECK(enc.rows(r, col) == doctest::Approx(0.5).epsilon(1e-14));
  }

  // relu is the first declared activation level and encodes to 0.
  const auto a1 = map.blocks[2];
  CHECK(a1.rule == EncodingRule::kBinary);
  CHECK(a1.width == 1);
  CHECK(std::get<std::string>(factors[2].levels[0]) == "relu");
  for (Eigen::Index r = 0; r < enc.rows.rows(); ++r)
    CHECK(enc.rows(r, a1.offset) == (std::get<std::string>(d.trials[r][2]) == "relu" ? 0.0 : 1.0));

  const auto two = encode_design(build_full_factorial(presets::two_level_factors(4)));
  CHECK(two.rows.cols() == 4);
}

TEST_CASE("decode examples") {
  const auto factors = presets::cnn_factors();
  const auto map = ColumnMap::from_factors(factors);
  std::vector<double> v(map.width(), 0.0);
  const auto first = decode_vector(v, map, true);
  for (std::size_t f = 0; f < factors.size(); ++f) CHECK(first[f] == factors[f].levels[0]);

  v[n1_index(map)] = 0.5;
  CHECK(std::get<double>(decode_vector(v, map, true)[0]) == doctest::Approx(128.0).epsilon(1e-12));
  const auto unsnapped = decode_vector(v, map, false);
  CHECK(std::get<double>(unsnapped[0]) == doctest::Approx(128.0).epsilon(1e-12));
  v[n1_index(map)] = 0.6;
  const double off = std::get<double>(decode_vector(v, map, false)[0]);
  CHECK(off == doctest::Approx(std::pow(10.0, std::log10(8.0) + 0.6 * std::log10(256.0))));
  CHECK(std::get<double>(decode_vector(v, map, true)[0]) == 128.0);

  // Binary threshold at 0.5.
  std::vector<double> w(map.width(), 0.0);
  w[map.blocks[2].offset] = 0.5;
  CHECK(std::get<std::string>(decode_vector(w, map, true)[2]) == "tanh");
  w[map.blocks[2].offset] = 0.4999;
  CHECK(std::get<std::string>(decode_vector(w, map, true)[2]) == "relu");

  // Numeric-discrete factors snap even without snap; ties go to the lower level.
  const auto& k1 = factors[1];
  REQUIRE(k1.kind == FactorKind::kNumericDiscrete);
  std::vector<double> t(map.width(), 0.0);
  const double lo = k1.numeric_level(0), hi = k1.numeric_level(k1.level_count() - 1);
  const double mid = (k1.numeric_level(0) + k1.numeric_level(1)) / 2;
  t[map.blocks[1].offset] = (mid - lo) / (hi - lo);
  CHECK(std::get<double>(decode_vector(t, map, false)[1]) == k1.numeric_level(0));

  CHECK(code_of([&] { decode_vector(std::vector<double>(3, 0.0), map, true); }) ==
        ErrorCode::kShape);
}

TEST_CASE("one-hot block argmax") {
  std::vector<FactorSpec> factors{FactorSpec::categorical("c", {"3", "5", "7"})};
  const auto map = ColumnMap::from_factors(factors);
  REQUIRE(map.width() == 3);
  CHECK(map.blocks[0].rule == EncodingRule::kOneHot);
  const std::vector<double> v{0.2, 0.7, 0.1};
  CHECK(std::get<std::string>(decode_vector(v, map, true)[0]) == "5");
  const std::vector<double> tie{0.4, 0.4, 0.2};
  CHECK(std::get<std::string>(decode_vector(tie, map, true)[0]) == "3");
  CHECK(map.normalized_level(0, v) == doctest::Approx(0.5));
}

TEST_CASE("encode-decode round trip") {
  const auto two = build_full_factorial(presets::two_level_factors(4));
  const auto enc2 = encode_design(two);
  for (Eigen::Index r = 0; r < enc2.rows.rows(); ++r) {
    const Eigen::VectorXd row = enc2.rows.row(r);
    CHECK(decode_vector(std::span<const double>(row.data(), row.size()), enc2.column_map, true) == two.trials[r]);
  }

  const auto cnn = cnn_constrained();
  const auto enc = encode_design(cnn);
  std::mt19937_64 rng(5);
  for (int rep = 0; rep < 100; ++rep) {
    const auto r = static_cast<Eigen::Index>(rng() % cnn.size());
    const Eigen::VectorXd row = enc.rows.row(r);
    CHECK(decode_vector(std::span<const double>(row.data(), row.size()), enc.column_map, true) == cnn.trials[r]);
  }
}

TEST_CASE("duplicate and split") {
  const auto enc = encode_design(build_full_factorial(presets::two_level_factors(4)));
  const auto split = duplicate_and_split(enc.rows, 50, 30, {}, 3);
  CHECK(split.train.rows() == 800);
  CHECK(split.test.rows() == 480);
  for (Eigen::Index r = 0; r < split.train.rows(); ++r) {
    bool found = false;
    for (Eigen::Index s = 0; s < enc.rows.rows() && !found; ++s)
      found = split.train.row(r) == enc.rows.row(s);
    CHECK(found);
  }
  const auto again = duplicate_and_split(enc.rows, 50, 30, {}, 3);
  CHECK(again.train == split.train);
  CHECK(again.test == split.test);

  NoiseConfig noise{true, 0.1};
  const auto noisy = duplicate_and_split(enc.rows, 5, 3, noise, 3);
  CHECK(noisy.train.minCoeff() >= 0.0);
  CHECK(noisy.train.maxCoeff() <= 1.0);
  CHECK(code_of([&] { duplicate_and_split(enc.rows, 0, 3, {}, 1); }) == ErrorCode::kValidation);

  const auto big = encode_design(cnn_constrained());
  const auto s2 = duplicate_and_split(big.rows, 5, 3, {}, 1);
  CHECK(s2.train.rows() == 9600);
  CHECK(s2.test.rows() == 5760);
}

TEST_CASE("design csv round trip") {
  const auto cnn = cnn_constrained();
  std::stringstream ss;
  write_design_csv(ss, cnn);
  const auto back = read_design_csv(ss, cnn.factors, Provenance::kInitialConstrained);
  CHECK(back.trials == cnn.trials);
  CHECK(back.trial_ids == cnn.trial_ids);

  std::stringstream bad("n1,k1\n8,3\n");
  CHECK_THROWS_AS(read_design_csv(bad, cnn.factors, Provenance::kInitialFull), Error);
}
