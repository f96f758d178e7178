#pragma once

// Decoding latent grids into generated designs, and design diagnostics.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "gdoe/constraint.hpp"
#include "gdoe/design.hpp"
#include "gdoe/geometry.hpp"

namespace gdoe {

namespace vae {
struct VaeModel;
}

struct Violation {
  std::int64_t trial_id = 0;
  std::string constraint;  // source text
};

struct DuplicateCollapse {
  std::int64_t dropped_id = 0;  // grid point index that decoded to a repeat
  std::int64_t kept_id = 0;     // trial it repeated
};

struct DesignDiagnostics {
  std::size_t n_trials = 0;   // decoded points (generate) or design rows (diagnose)
  std::size_t n_unique = 0;   // distinct trials
  std::vector<Violation> violations;
  std::vector<std::pair<std::string, std::string>> confounded_pairs;
  std::vector<std::string> degenerate;  // factors with a single level present
  std::vector<double> level_coverage;   // per factor, in [0,1]
  std::vector<double> balance;          // per factor, chi-square vs uniform
  double orthogonality = 0.0;           // max |pairwise correlation|
  std::optional<double> density_uniformity;  // chi-square over a 4x4 partition
  std::vector<double> nn_distance;      // per trial, encoded-space distance
  std::vector<DuplicateCollapse> duplicates;

  /// Fraction of the n_trials points whose trial violates a constraint.
  double violation_fraction() const;
  /// True when a constraint is violated or a confounded pair exists.
  bool flagged() const { return !violations.empty() || !confounded_pairs.empty(); }
};

nlohmann::json to_json(const DesignDiagnostics& diagnostics);

/// Computes every diagnostic of `design`. Correlation uses one normalized
/// column per factor (see ColumnMap::normalized_level). Continuous factors
/// are counted at their nearest declared level for coverage and balance.
/// `uniformed` (one point per trial) enables density_uniformity.
DesignDiagnostics diagnose(const Design& design, std::span<const ConstraintExpr> constraints,
                           std::span<const Point2> uniformed = {});

struct GeneratedDesign {
  Design design;
  std::vector<Point2> uniformed;  // per kept trial
  DesignDiagnostics diagnostics;
};

/// Decodes every grid point, drops exact repeats (first occurrence kept, the
/// collapse recorded), and diagnoses the result. Trial ids are grid point
/// indices. Violating trials are kept and flagged.
GeneratedDesign generate(const vae::VaeModel& model, const GridSpec& spec,
                         std::span<const ConstraintExpr> constraints, bool snap);

/// Same for explicit decoded points (already in uniformed coordinates).
GeneratedDesign generate_from_points(const vae::VaeModel& model,
                                     std::span<const Point2> uniformed,
                                     std::span<const ConstraintExpr> constraints, bool snap,
                                     Provenance provenance = Provenance::kGeneratedGrid);

/// Uniform sample of n trials without replacement; original ids kept.
Design random_subset(const Design& design, std::size_t n, std::uint64_t seed);

}  // namespace gdoe
