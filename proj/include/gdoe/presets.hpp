#pragma once

// Built-in factor spaces and the synthetic response oracle over the CNN
// tuning space.

#include <random>
#include <string>
#include <vector>

#include "gdoe/design.hpp"

namespace gdoe::presets {

/// F1..Fk, each numeric-discrete with levels {-1, 1}.
std::vector<FactorSpec> two_level_factors(int k);

/// The nine CNN hyperparameters: n1 k1 a1 p1 n2 k2 a2 p2 d. Filter counts
/// are numeric-continuous on a log10 axis; kernel, pool, and dropout are
/// numeric-discrete; activations are categorical.
std::vector<FactorSpec> cnn_factors();

/// "n1 > n2" and "k1 >= k2".
std::vector<std::string> cnn_constraints();

/// Deterministic response over the CNN space with two local maxima:
///
///   y = 90 + 8 * max(exp(-q_A), 0.85 * exp(-q_B)),   q_X = sum_f w_f (u_f - c_f)^2
///
/// u_f is the factor on [0,1]: min-max on the (log10 for n) axis, relu = 0,
/// tanh = 1. Weights: n1 n2 2.0; k1 k2 1.0; a1 a2 0.3; p1 p2 0.2; d 0.5.
///   peak A (global, y = 98.0): n1 512, n2 32, k1 5, k2 3, relu, relu, p 2, 2, d 0.5
///   peak B (local,  y = 96.8): n1 2048, n2 512, k1 7, k2 7, tanh, tanh, p 4, 4, d 0.25
/// Both peaks satisfy the two constraints. Continuous n values are accepted.
class SyntheticOracle {
 public:
  static constexpr double kNoiseSigma = 0.05;

  explicit SyntheticOracle(std::vector<FactorSpec> factors);

  double value(const Trial& trial) const;

  /// value + N(0, kNoiseSigma^2) per replicate.
  std::vector<double> replicates(const Trial& trial, std::size_t n, std::mt19937_64& rng) const;

  /// The global optimum value (peak A).
  static constexpr double optimum() { return 98.0; }

 private:
  std::vector<FactorSpec> factors_;
  std::vector<std::size_t> index_;  // position of n1 k1 a1 p1 n2 k2 a2 p2 d
};

}  // namespace gdoe::presets
