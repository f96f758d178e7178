#pragma once

// Replicated responses, lower confidence limits, interpolated response
// surfaces over the uniformed latent square, and permutation importance.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "gdoe/design.hpp"
#include "gdoe/geometry.hpp"

namespace gdoe {

struct ResponseRecord {
  std::int64_t trial_id = 0;
  std::vector<double> replicates;
  double mean = 0.0;
  double std_dev = 0.0;  // n - 1 denominator
  double confidence = 0.90;
  double lcl = 0.0;      // mean - t(confidence, n - 1) * s / sqrt(n)
};

nlohmann::json to_json(const ResponseRecord& record);
ResponseRecord response_record_from_json(const nlohmann::json& j);

/// Throws Error(kInsufficientData) for fewer than two replicates and
/// Error(kValidation) for a confidence outside (0, 1).
ResponseRecord compute_lcl(std::span<const double> replicates, double confidence = 0.90,
                           std::int64_t trial_id = 0);

/// CSV rows "trial_id,r1,r2,..." with an optional header; the replicate
/// count may vary per row.
std::vector<ResponseRecord> read_responses_csv(std::istream& in, double confidence = 0.90);

struct Triangulation {
  std::vector<Point2> vertices;
  std::vector<double> values;
  std::vector<std::array<std::size_t, 3>> triangles;  // counter-clockwise
};

/// Bowyer-Watson Delaunay triangulation. Points sharing coordinates are
/// merged first, their values averaged. Throws Error(kTriangulation) when
/// fewer than three distinct points remain or all are collinear.
Triangulation triangulate(std::span<const Point2> points, std::span<const double> values);

/// Barycentric value of the containing triangle, or the nearest vertex's
/// value outside the hull. `interior` reports which rule applied.
double interpolate_at(const Triangulation& tri, Point2 p, bool* interior = nullptr);

struct Surface {
  FieldMap map;
  std::vector<std::uint8_t> interior;  // per cell: 1 barycentric, 0 nearest
  Triangulation triangulation;
  bool nearest_only = false;  // no triangulation was possible
};

nlohmann::json to_json(const Surface& surface);

/// Response interpolated on a resolution x resolution lattice of cell
/// centres over the uniformed square.
Surface interpolate(std::span<const Point2> uniformed, std::span<const double> values,
                    int resolution = 100);

/// Nearest-trial surface with no triangles, for point sets that cannot be
/// triangulated (fewer than three distinct points, or all collinear).
Surface interpolate_nearest(std::span<const Point2> uniformed, std::span<const double> values,
                            int resolution = 100);

enum class Goal { kMax, kMin };

std::string to_string(Goal goal);
Goal goal_from_string(const std::string& text);

struct Optimum {
  int i = 0;  // column
  int j = 0;  // row
  Point2 point;
  double value = 0.0;
};

/// Extremal cell; ties go to the lowest (row, column).
Optimum find_optimum(const Surface& surface, Goal goal);

/// Index of the best executed value; ties go to the first.
std::size_t best_index(std::span<const double> values, Goal goal);

struct ImportanceConfig {
  std::size_t replications = 10;
  std::uint64_t seed = 0;
  std::size_t epochs = 100;
  std::size_t batch_size = 128;
  double learning_rate = 0.001;
};

struct ImportanceResult {
  std::vector<std::string> factors;
  std::vector<double> scores;        // mean relative loss increase per factor
  std::vector<std::size_t> ranking;  // factor indices, most important first
  double base_loss = 0.0;
};

nlohmann::json to_json(const ImportanceResult& result);

/// Fits the 16-4-1 regressor to the standardized response (duplication x50
/// / x30 for designs of at most 64 trials, x5 / x3 otherwise) and reports,
/// per factor, the mean relative increase of evaluation MSE when that
/// factor's encoded columns are permuted across evaluation rows.
ImportanceResult importance(const Design& design, std::span<const double> responses,
                            const ImportanceConfig& config);

}  // namespace gdoe
