#include "gdoe/design.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <set>
#include <unordered_set>

#include "csv.hpp"
#include "gdoe/constraint.hpp"
#include "gdoe/error.hpp"

namespace gdoe {

std::string to_string(FactorKind kind) {
  switch (kind) {
    case FactorKind::kNumericDiscrete: return "numeric-discrete";
    case FactorKind::kNumericContinuous: return "numeric-continuous";
    case FactorKind::kCategorical: return "categorical";
  }
  return "?";
}

std::string to_string(Transform transform) {
  return transform == Transform::kLog10 ? "log10" : "identity";
}

FactorKind factor_kind_from_string(const std::string& text) {
  if (text == "numeric-discrete") return FactorKind::kNumericDiscrete;
  if (text == "numeric-continuous") return FactorKind::kNumericContinuous;
  if (text == "categorical") return FactorKind::kCategorical;
  throw Error(ErrorCode::kValidation, "unknown factor kind '" + text + "'");
}

Transform transform_from_string(const std::string& text) {
  if (text == "identity") return Transform::kIdentity;
  if (text == "log10") return Transform::kLog10;
  throw Error(ErrorCode::kValidation, "unknown transform '" + text + "'");
}

std::string format_level(const Level& level) {
  if (const auto* number = std::get_if<double>(&level)) return csv::format_double(*number);
  return std::get<std::string>(level);
}

FactorSpec FactorSpec::numeric(std::string name, std::vector<double> levels,
                               Transform transform, FactorKind kind) {
  FactorSpec spec;
  spec.name = std::move(name);
  spec.kind = kind;
  spec.transform = transform;
  spec.levels.assign(levels.begin(), levels.end());
  return spec;
}

FactorSpec FactorSpec::categorical(std::string name, std::vector<std::string> levels) {
  FactorSpec spec;
  spec.name = std::move(name);
  spec.kind = FactorKind::kCategorical;
  spec.levels.assign(levels.begin(), levels.end());
  return spec;
}

double FactorSpec::transformed(double raw) const {
  return transform == Transform::kLog10 ? std::log10(raw) : raw;
}

double FactorSpec::untransformed(double value) const {
  return transform == Transform::kLog10 ? std::pow(10.0, value) : value;
}

std::optional<std::size_t> FactorSpec::level_index(const Level& level) const {
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (levels[i] == level) return i;
  }
  return std::nullopt;
}

std::size_t FactorSpec::nearest_level(double raw) const {
  const double t = transformed(raw);
  std::size_t best = 0;
  double best_distance = std::fabs(t - transformed(numeric_level(0)));
  for (std::size_t i = 1; i < levels.size(); ++i) {
    const double distance = std::fabs(t - transformed(numeric_level(i)));
    if (distance < best_distance) {
      best = i;
      best_distance = distance;
    }
  }
  return best;
}

void FactorSpec::validate() const {
  if (name.empty()) throw Error(ErrorCode::kValidation, "factor name must not be empty");
  if (levels.size() < 2) {
    throw Error(ErrorCode::kValidation, "factor '" + name + "' needs at least 2 levels");
  }
  if (is_categorical()) {
    if (transform != Transform::kIdentity) {
      throw Error(ErrorCode::kValidation,
                  "categorical factor '" + name + "' cannot have a transform");
    }
    std::set<std::string> seen;
    for (const auto& level : levels) {
      const auto* text = std::get_if<std::string>(&level);
      if (text == nullptr) {
        throw Error(ErrorCode::kValidation,
                    "categorical factor '" + name + "' has a numeric level");
      }
      if (!seen.insert(*text).second) {
        throw Error(ErrorCode::kValidation,
                    "factor '" + name + "' repeats level '" + *text + "'");
      }
    }
    return;
  }
  for (std::size_t i = 0; i < levels.size(); ++i) {
    const auto* value = std::get_if<double>(&levels[i]);
    if (value == nullptr || !std::isfinite(*value)) {
      throw Error(ErrorCode::kValidation,
                  "numeric factor '" + name + "' has a non-numeric level");
    }
    if (i > 0 && !(numeric_level(i - 1) < *value)) {
      throw Error(ErrorCode::kValidation,
                  "levels of factor '" + name + "' must be strictly increasing");
    }
    if (transform == Transform::kLog10 && *value <= 0.0) {
      throw Error(ErrorCode::kValidation,
                  "log10 factor '" + name + "' requires positive levels");
    }
  }
}

void validate_factors(std::span<const FactorSpec> factors) {
  std::set<std::string> names;
  for (const auto& factor : factors) {
    factor.validate();
    if (!names.insert(factor.name).second) {
      throw Error(ErrorCode::kValidation, "duplicate factor name '" + factor.name + "'");
    }
  }
}

std::optional<std::size_t> find_factor(std::span<const FactorSpec> factors,
                                       std::string_view name) {
  for (std::size_t i = 0; i < factors.size(); ++i) {
    if (factors[i].name == name) return i;
  }
  return std::nullopt;
}

std::string to_string(Provenance provenance) {
  switch (provenance) {
    case Provenance::kInitialFull: return "initial-full";
    case Provenance::kInitialConstrained: return "initial-constrained";
    case Provenance::kGeneratedGrid: return "generated-grid";
    case Provenance::kGeneratedCluster: return "generated-cluster";
    case Provenance::kRandomSubset: return "random-subset";
  }
  return "?";
}

Provenance provenance_from_string(const std::string& text) {
  for (auto p : {Provenance::kInitialFull, Provenance::kInitialConstrained,
                 Provenance::kGeneratedGrid, Provenance::kGeneratedCluster,
                 Provenance::kRandomSubset}) {
    if (to_string(p) == text) return p;
  }
  throw Error(ErrorCode::kValidation, "unknown provenance '" + text + "'");
}

void Design::validate() const {
  validate_factors(factors);
  if (trial_ids.size() != trials.size()) {
    throw Error(ErrorCode::kValidation, "design has " + std::to_string(trials.size()) +
                                            " trials but " + std::to_string(trial_ids.size()) +
                                            " trial ids");
  }
  std::unordered_set<std::int64_t> ids;
  for (const auto id : trial_ids) {
    if (!ids.insert(id).second) {
      throw Error(ErrorCode::kValidation, "duplicate trial id " + std::to_string(id));
    }
  }
  const bool generated =
      provenance == Provenance::kGeneratedGrid || provenance == Provenance::kGeneratedCluster;
  for (std::size_t r = 0; r < trials.size(); ++r) {
    const Trial& trial = trials[r];
    if (trial.size() != factors.size()) {
      throw Error(ErrorCode::kShape, "trial " + std::to_string(trial_ids[r]) + " has " +
                                         std::to_string(trial.size()) + " values, expected " +
                                         std::to_string(factors.size()));
    }
    for (std::size_t f = 0; f < factors.size(); ++f) {
      const FactorSpec& factor = factors[f];
      const bool numeric_value = std::holds_alternative<double>(trial[f]);
      if (numeric_value == factor.is_categorical()) {
        throw Error(ErrorCode::kValidation, "trial " + std::to_string(trial_ids[r]) +
                                                " has a value of the wrong type for '" +
                                                factor.name + "'");
      }
      if (factor.kind == FactorKind::kNumericContinuous && generated) continue;
      if (!factor.level_index(trial[f])) {
        throw Error(ErrorCode::kValidation, "trial " + std::to_string(trial_ids[r]) +
                                                " uses undeclared level " +
                                                format_level(trial[f]) + " of '" + factor.name +
                                                "'");
      }
    }
  }
}

Design build_full_factorial(std::span<const FactorSpec> factors, std::size_t cap) {
  if (factors.empty()) throw Error(ErrorCode::kValidation, "at least one factor is required");
  validate_factors(factors);

  std::size_t total = 1;
  for (const auto& factor : factors) {
    const std::size_t n = factor.level_count();
    if (total > cap / n) {
      throw Error(ErrorCode::kSize, "full factorial exceeds the enumeration cap of " +
                                        std::to_string(cap) + " trials (partial product " +
                                        std::to_string(total) + " x " + std::to_string(n) +
                                        ")");
    }
    total *= n;
  }

  Design design;
  design.factors.assign(factors.begin(), factors.end());
  design.provenance = Provenance::kInitialFull;
  design.trials.reserve(total);
  design.trial_ids.reserve(total);

  std::vector<std::size_t> index(factors.size(), 0);
  for (std::size_t t = 0; t < total; ++t) {
    Trial trial;
    trial.reserve(factors.size());
    for (std::size_t f = 0; f < factors.size(); ++f) trial.push_back(factors[f].levels[index[f]]);
    design.trials.push_back(std::move(trial));
    design.trial_ids.push_back(static_cast<std::int64_t>(t));
    // Odometer increment; the last factor varies fastest.
    for (std::size_t f = factors.size(); f-- > 0;) {
      if (++index[f] < factors[f].level_count()) break;
      index[f] = 0;
    }
  }
  return design;
}

Design filter_by_constraints(const Design& design, std::span<const ConstraintExpr> constraints) {
  Design out;
  out.factors = design.factors;
  out.provenance = Provenance::kInitialConstrained;
  for (std::size_t r = 0; r < design.trials.size(); ++r) {
    const bool keep = std::all_of(constraints.begin(), constraints.end(),
                                  [&](const ConstraintExpr& c) { return evaluate(c, design.trials[r]); });
    if (keep) {
      out.trials.push_back(design.trials[r]);
      out.trial_ids.push_back(design.trial_ids[r]);
    }
  }
  return out;
}

std::string to_string(EncodingRule rule) {
  switch (rule) {
    case EncodingRule::kMinMax: return "minmax";
    case EncodingRule::kBinary: return "binary";
    case EncodingRule::kOneHot: return "onehot";
  }
  return "?";
}

EncodingRule encoding_rule_from_string(const std::string& text) {
  if (text == "minmax") return EncodingRule::kMinMax;
  if (text == "binary") return EncodingRule::kBinary;
  if (text == "onehot") return EncodingRule::kOneHot;
  throw Error(ErrorCode::kValidation, "unknown encoding rule '" + text + "'");
}

ColumnMap ColumnMap::from_factors(std::span<const FactorSpec> factors) {
  validate_factors(factors);
  ColumnMap map;
  map.factors.assign(factors.begin(), factors.end());
  std::size_t offset = 0;
  for (const auto& factor : factors) {
    ColumnBlock block;
    block.offset = offset;
    if (factor.is_numeric()) {
      block.rule = EncodingRule::kMinMax;
      block.width = 1;
    } else if (factor.level_count() == 2) {
      block.rule = EncodingRule::kBinary;
      block.width = 1;
    } else {
      block.rule = EncodingRule::kOneHot;
      block.width = factor.level_count();
    }
    offset += block.width;
    map.blocks.push_back(block);
  }
  return map;
}

std::size_t ColumnMap::width() const {
  return blocks.empty() ? 0 : blocks.back().offset + blocks.back().width;
}

void ColumnMap::encode_trial(const Trial& trial, std::span<double> out) const {
  if (trial.size() != factors.size() || out.size() != width()) {
    throw Error(ErrorCode::kShape, "encode_trial: trial or output width mismatch");
  }
  for (std::size_t f = 0; f < factors.size(); ++f) {
    const FactorSpec& factor = factors[f];
    const ColumnBlock& block = blocks[f];
    switch (block.rule) {
      case EncodingRule::kMinMax: {
        const double* raw = std::get_if<double>(&trial[f]);
        if (raw == nullptr) {
          throw Error(ErrorCode::kValidation, "non-numeric value for factor '" + factor.name + "'");
        }
        const double lo = factor.transformed(factor.numeric_level(0));
        const double hi = factor.transformed(factor.numeric_level(factor.level_count() - 1));
        out[block.offset] = std::clamp((factor.transformed(*raw) - lo) / (hi - lo), 0.0, 1.0);
        break;
      }
      case EncodingRule::kBinary:
      case EncodingRule::kOneHot: {
        const auto index = factor.level_index(trial[f]);
        if (!index) {
          throw Error(ErrorCode::kValidation, "undeclared level " + format_level(trial[f]) +
                                                  " for factor '" + factor.name + "'");
        }
        if (block.rule == EncodingRule::kBinary) {
          out[block.offset] = static_cast<double>(*index);
        } else {
          for (std::size_t k = 0; k < block.width; ++k) out[block.offset + k] = 0.0;
          out[block.offset + *index] = 1.0;
        }
        break;
      }
    }
  }
}

namespace {

std::size_t argmax_block(std::span<const double> v, const ColumnBlock& block) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < block.width; ++k) {
    if (v[block.offset + k] > v[block.offset + best]) best = k;
  }
  return best;
}

}  // namespace

double ColumnMap::normalized_level(std::size_t factor, std::span<const double> encoded_row) const {
  const ColumnBlock& block = blocks.at(factor);
  if (block.rule == EncodingRule::kOneHot) {
    return static_cast<double>(argmax_block(encoded_row, block)) /
           static_cast<double>(block.width - 1);
  }
  return encoded_row[block.offset];
}

EncodedMatrix encode_design(const Design& design) {
  if (design.empty()) throw Error(ErrorCode::kValidation, "cannot encode an empty design");
  EncodedMatrix m;
  m.column_map = ColumnMap::from_factors(design.factors);
  const std::size_t width = m.column_map.width();
  // Row-major scratch so each trial encodes into a contiguous span.
  std::vector<double> row(width);
  m.rows.resize(static_cast<Eigen::Index>(design.size()), static_cast<Eigen::Index>(width));
  for (std::size_t r = 0; r < design.size(); ++r) {
    m.column_map.encode_trial(design.trials[r], row);
    for (std::size_t c = 0; c < width; ++c) {
      m.rows(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = row[c];
    }
  }
  return m;
}

Trial decode_vector(std::span<const double> v, const ColumnMap& column_map, bool snap) {
  if (v.size() != column_map.width()) {
    throw Error(ErrorCode::kShape, "decode_vector: expected " +
                                       std::to_string(column_map.width()) + " values, got " +
                                       std::to_string(v.size()));
  }
  Trial trial;
  trial.reserve(column_map.factors.size());
  for (std::size_t f = 0; f < column_map.factors.size(); ++f) {
    const FactorSpec& factor = column_map.factors[f];
    const ColumnBlock& block = column_map.blocks[f];
    switch (block.rule) {
      case EncodingRule::kMinMax: {
        const double x = std::clamp(v[block.offset], 0.0, 1.0);
        const double lo = factor.transformed(factor.numeric_level(0));
        const double hi = factor.transformed(factor.numeric_level(factor.level_count() - 1));
        const double raw = factor.untransformed(lo + x * (hi - lo));
        if (snap || factor.kind == FactorKind::kNumericDiscrete) {
          trial.emplace_back(factor.levels[factor.nearest_level(raw)]);
        } else {
          trial.emplace_back(raw);
        }
        break;
      }
      case EncodingRule::kBinary:
        trial.emplace_back(factor.levels[v[block.offset] >= 0.5 ? 1 : 0]);
        break;
      case EncodingRule::kOneHot:
        trial.emplace_back(factor.levels[argmax_block(v, block)]);
        break;
    }
  }
  return trial;
}

void NoiseConfig::validate() const {
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) {
    throw Error(ErrorCode::kValidation, "noise alpha must be a finite nonnegative number");
  }
}

SplitMatrices duplicate_and_split(const Eigen::MatrixXd& m, std::size_t train_dup,
                                  std::size_t test_dup, const NoiseConfig& noise,
                                  std::uint64_t seed) {
  if (train_dup < 1 || test_dup < 1) {
    throw Error(ErrorCode::kValidation, "duplication counts must be at least 1");
  }
  noise.validate();
  std::mt19937_64 rng(seed);
  auto replicate = [&](std::size_t copies) {
    const Eigen::Index n = m.rows();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n) * copies);
    for (std::size_t i = 0; i < order.size(); ++i) {
      order[i] = static_cast<Eigen::Index>(i % static_cast<std::size_t>(n));
    }
    std::shuffle(order.begin(), order.end(), rng);
    Eigen::MatrixXd out(static_cast<Eigen::Index>(order.size()), m.cols());
    for (std::size_t i = 0; i < order.size(); ++i) {
      out.row(static_cast<Eigen::Index>(i)) = m.row(order[i]);
    }
    if (noise.active()) {
      std::normal_distribution<double> gauss(0.0, noise.alpha);
      for (Eigen::Index r = 0; r < out.rows(); ++r) {
        for (Eigen::Index c = 0; c < out.cols(); ++c) {
          out(r, c) = std::clamp(out(r, c) + gauss(rng), 0.0, 1.0);
        }
      }
    }
    return out;
  };
  SplitMatrices split;
  split.train = replicate(train_dup);
  split.test = replicate(test_dup);
  return split;
}

void write_design_csv(std::ostream& out, const Design& design, bool with_ids) {
  if (with_ids) out << "trial_id";
  for (std::size_t f = 0; f < design.factors.size(); ++f) {
    if (with_ids || f > 0) out << ',';
    out << csv::escape(design.factors[f].name);
  }
  out << '\n';
  for (std::size_t r = 0; r < design.size(); ++r) {
    if (with_ids) out << design.trial_ids[r];
    for (std::size_t f = 0; f < design.factors.size(); ++f) {
      if (with_ids || f > 0) out << ',';
      out << csv::escape(format_level(design.trials[r][f]));
    }
    out << '\n';
  }
}

Design read_design_csv(std::istream& in, std::span<const FactorSpec> factors,
                       Provenance provenance) {
  std::string line;
  if (!csv::next_line(in, line)) throw Error(ErrorCode::kIo, "design CSV is empty");
  const auto header = csv::split_line(line);
  const bool has_ids = !header.empty() && header.front() == "trial_id";
  const std::size_t first = has_ids ? 1 : 0;

  // column -> factor index
  std::vector<std::size_t> mapping;
  for (std::size_t c = first; c < header.size(); ++c) {
    const auto index = find_factor(factors, header[c]);
    if (!index) {
      throw Error(ErrorCode::kNameResolution, "design CSV column '" + header[c] +
                                                  "' does not name a declared factor");
    }
    mapping.push_back(*index);
  }
  if (mapping.size() != factors.size()) {
    throw Error(ErrorCode::kShape, "design CSV must have one column per factor");
  }

  Design design;
  design.factors.assign(factors.begin(), factors.end());
  design.provenance = provenance;
  std::int64_t next_id = 0;
  std::size_t line_no = 1;
  while (csv::next_line(in, line)) {
    ++line_no;
    const auto fields = csv::split_line(line);
    if (fields.size() != header.size()) {
      throw Error(ErrorCode::kShape, "design CSV line " + std::to_string(line_no) + " has " +
                                         std::to_string(fields.size()) + " fields, expected " +
                                         std::to_string(header.size()));
    }
    Trial trial(factors.size());
    for (std::size_t c = 0; c < mapping.size(); ++c) {
      const FactorSpec& factor = factors[mapping[c]];
      const std::string& field = fields[first + c];
      if (factor.is_categorical()) {
        trial[mapping[c]] = field;
      } else {
        double value = 0.0;
        if (!csv::parse_double(field, value)) {
          throw Error(ErrorCode::kValidation, "design CSV line " + std::to_string(line_no) +
                                                  ": '" + field + "' is not a number");
        }
        trial[mapping[c]] = value;
      }
    }
    std::int64_t id = next_id;
    if (has_ids) {
      double raw = 0.0;
      if (!csv::parse_double(fields[0], raw) || raw != std::floor(raw)) {
        throw Error(ErrorCode::kValidation,
                    "design CSV line " + std::to_string(line_no) + ": bad trial_id");
      }
      id = static_cast<std::int64_t>(raw);
    }
    next_id = id + 1;
    design.trials.push_back(std::move(trial));
    design.trial_ids.push_back(id);
  }
  design.validate();
  return design;
}

}  // namespace gdoe
