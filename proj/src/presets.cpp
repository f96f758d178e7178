#include "gdoe/presets.hpp"

#include <array>
#include <cmath>

#include "gdoe/error.hpp"

namespace gdoe::presets {

std::vector<FactorSpec> two_level_factors(int k) {
  if (k < 1) throw Error(ErrorCode::kValidation, "need at least one factor");
  std::vector<FactorSpec> out;
  for (int i = 1; i <= k; ++i) out.push_back(FactorSpec::numeric("F" + std::to_string(i), {-1, 1}));
  return out;
}

std::vector<FactorSpec> cnn_factors() {
  const std::vector<double> filters{8, 32, 128, 512, 2048};
  return {
      FactorSpec::numeric("n1", filters, Transform::kLog10, FactorKind::kNumericContinuous),
      FactorSpec::numeric("k1", {3, 5, 7}),
      FactorSpec::categorical("a1", {"relu", "tanh"}),
      FactorSpec::numeric("p1", {2, 4}),
      FactorSpec::numeric("n2", filters, Transform::kLog10, FactorKind::kNumericContinuous),
      FactorSpec::numeric("k2", {3, 5, 7}),
      FactorSpec::categorical("a2", {"relu", "tanh"}),
      FactorSpec::numeric("p2", {2, 4}),
      FactorSpec::numeric("d", {0.25, 0.5}),
  };
}

std::vector<std::string> cnn_constraints() { return {"n1 > n2", "k1 >= k2"}; }

namespace {

constexpr std::array<const char*, 9> kNames{"n1", "k1", "a1", "p1", "n2",
                                            "k2", "a2", "p2", "d"};
constexpr std::array<double, 9> kWeights{2.0, 1.0, 0.3, 0.2, 2.0, 1.0, 0.3, 0.2, 0.5};
// Peak centres in u coordinates, same factor order.
constexpr std::array<double, 9> kPeakA{0.75, 0.5, 0.0, 0.0, 0.25, 0.0, 0.0, 0.0, 1.0};
constexpr std::array<double, 9> kPeakB{1.0, 1.0, 1.0, 1.0, 0.75, 1.0, 1.0, 1.0, 0.0};
constexpr double kHeightB = 0.85;

}  // namespace

SyntheticOracle::SyntheticOracle(std::vector<FactorSpec> factors) : factors_(std::move(factors)) {
  for (const char* name : kNames) {
    const auto idx = find_factor(factors_, name);
    if (!idx) {
      throw Error(ErrorCode::kNameResolution,
                  std::string("synthetic oracle needs factor '") + name + "'");
    }
    index_.push_back(*idx);
  }
}

double SyntheticOracle::value(const Trial& trial) const {
  double qa = 0.0;
  double qb = 0.0;
  for (std::size_t k = 0; k < kNames.size(); ++k) {
    const FactorSpec& f = factors_[index_[k]];
    const Level& level = trial.at(index_[k]);
    double u = 0.0;
    if (f.is_categorical()) {
      const auto idx = f.level_index(level);
      if (!idx) throw Error(ErrorCode::kValidation, "undeclared level for " + f.name);
      u = static_cast<double>(*idx) / static_cast<double>(f.level_count() - 1);
    } else {
      const double lo = f.transformed(f.numeric_level(0));
      const double hi = f.transformed(f.numeric_level(f.level_count() - 1));
      u = (f.transformed(std::get<double>(level)) - lo) / (hi - lo);
    }
    qa += kWeights[k] * (u - kPeakA[k]) * (u - kPeakA[k]);
    qb += kWeights[k] * (u - kPeakB[k]) * (u - kPeakB[k]);
  }
  return 90.0 + 8.0 * std::max(std::exp(-qa), kHeightB * std::exp(-qb));
}

std::vector<double> SyntheticOracle::replicates(const Trial& trial, std::size_t n,
                                                std::mt19937_64& rng) const {
  const double mean = value(trial);
  std::normal_distribution<double> noise(0.0, kNoiseSigma);
  std::vector<double> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(mean + noise(rng));
  return out;
}

}  // namespace gdoe::presets
