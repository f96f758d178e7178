#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace gdoe {

struct ConstraintExpr;

enum class FactorKind { kNumericDiscrete, kNumericContinuous, kCategorical };
enum class Transform { kIdentity, kLog10 };

/// A raw factor level: a number for numeric factors, text for categoricals.
using Level = std::variant<double, std::string>;
using Trial = std::vector<Level>;

std::string to_string(FactorKind kind);
std::string to_string(Transform transform);
FactorKind factor_kind_from_string(const std::string& text);
Transform transform_from_string(const std::string& text);

/// Renders a level the way it appears in CSV files and constraint text.
std::string format_level(const Level& level);

struct FactorSpec {
  std::string name;
  FactorKind kind = FactorKind::kNumericDiscrete;
  std::vector<Level> levels;
  Transform transform = Transform::kIdentity;

  static FactorSpec numeric(std::string name, std::vector<double> levels,
                            Transform transform = Transform::kIdentity,
                            FactorKind kind = FactorKind::kNumericDiscrete);
  static FactorSpec categorical(std::string name, std::vector<std::string> levels);

  bool is_categorical() const { return kind == FactorKind::kCategorical; }
  bool is_numeric() const { return !is_categorical(); }
  std::size_t level_count() const { return levels.size(); }
  double numeric_level(std::size_t i) const { return std::get<double>(levels[i]); }

  /// Numeric value on the transformed axis (log10 or identity).
  double transformed(double raw) const;
  double untransformed(double value) const;

  /// Index of `level` among the declared levels, if present.
  std::optional<std::size_t> level_index(const Level& level) const;

  /// Index of the declared level nearest to `raw` on the transformed axis;
  /// ties go to the lower level.
  std::size_t nearest_level(double raw) const;

  /// Throws Error(kValidation) if an invariant is violated.
  void validate() const;
};

/// Checks every spec plus name uniqueness.
void validate_factors(std::span<const FactorSpec> factors);

/// Index of `name` in `factors`, or nullopt.
std::optional<std::size_t> find_factor(std::span<const FactorSpec> factors,
                                       std::string_view name);

enum class Provenance {
  kInitialFull,
  kInitialConstrained,
  kGeneratedGrid,
  kGeneratedCluster,
  kRandomSubset,
};

std::string to_string(Provenance provenance);
Provenance provenance_from_string(const std::string& text);

struct Design {
  std::vector<FactorSpec> factors;
  std::vector<Trial> trials;
  Provenance provenance = Provenance::kInitialFull;
  std::vector<std::int64_t> trial_ids;

  std::size_t size() const { return trials.size(); }
  bool empty() const { return trials.empty(); }

  /// Level membership, row widths, and id uniqueness.
  void validate() const;
};

inline constexpr std::size_t kDefaultEnumerationCap = 10'000'000;

/// Cartesian product of all factor levels, last factor varying fastest.
Design build_full_factorial(std::span<const FactorSpec> factors,
                            std::size_t cap = kDefaultEnumerationCap);

/// Keeps the trials satisfying every constraint; ids and order preserved.
Design filter_by_constraints(const Design& design,
                             std::span<const ConstraintExpr> constraints);

enum class EncodingRule { kMinMax, kBinary, kOneHot };

std::string to_string(EncodingRule rule);
EncodingRule encoding_rule_from_string(const std::string& text);

struct ColumnBlock {
  std::size_t offset = 0;
  std::size_t width = 0;
  EncodingRule rule = EncodingRule::kMinMax;
};

/// Where each factor lives in the encoded representation and how it is
/// encoded. Encoding depends only on the declared levels.
struct ColumnMap {
  std::vector<FactorSpec> factors;
  std::vector<ColumnBlock> blocks;

  static ColumnMap from_factors(std::span<const FactorSpec> factors);

  std::size_t width() const;

  /// Encodes one trial into `out` (length width()).
  void encode_trial(const Trial& trial, std::span<double> out) const;

  /// Per-factor scalar in [0,1]: the min-max column for numeric factors, the
  /// 0/1 column for binary categoricals, argmax index / (L-1) for one-hot.
  double normalized_level(std::size_t factor, std::span<const double> encoded_row) const;
};

struct EncodedMatrix {
  Eigen::MatrixXd rows;
  ColumnMap column_map;
};

EncodedMatrix encode_design(const Design& design);

/// Maps an encoded vector back to raw levels. Numeric-discrete factors are
/// always snapped; numeric-continuous ones only when `snap` is set.
Trial decode_vector(std::span<const double> v, const ColumnMap& column_map, bool snap);

struct NoiseConfig {
  bool enabled = false;
  double alpha = 0.0;

  bool active() const { return enabled && alpha > 0.0; }
  void validate() const;
};

struct SplitMatrices {
  Eigen::MatrixXd train;
  Eigen::MatrixXd test;
};

/// Row-duplicates `m` into train/test matrices, shuffles each with `seed`,
/// then optionally adds clamped Gaussian noise.
SplitMatrices duplicate_and_split(const Eigen::MatrixXd& m, std::size_t train_dup,
                                  std::size_t test_dup, const NoiseConfig& noise,
                                  std::uint64_t seed);

/// CSV export: header of factor names (optionally led by trial_id), one trial
/// per row.
void write_design_csv(std::ostream& out, const Design& design, bool with_ids = true);

/// CSV import against known factors. Columns are matched by header name; a
/// leading `trial_id` column is optional.
Design read_design_csv(std::istream& in, std::span<const FactorSpec> factors,
                       Provenance provenance);

}  // namespace gdoe
