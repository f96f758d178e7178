#pragma once

// Latent-space point patterns, field maps over the uniformed square, and the
// factor-level gradient metric.

#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "gdoe/geometry_types.hpp"

namespace gdoe {

namespace vae {
struct VaeModel;
}

enum class GridType { kSquare, kPolar, kDoubleSquare, kExplicit };

std::string to_string(GridType type);
GridType grid_type_from_string(const std::string& text);

struct GridSpec {
  GridType type = GridType::kSquare;
  LatentSpace space = LatentSpace::kUniformed;

  // square
  int nx = 3;
  int ny = 3;
  // polar
  int rings = 2;
  int angular = 3;
  bool center = true;
  // double-square
  double inner_radius = 0.5;
  double outer_radius = 1.0;
  // rotation in radians (square: about (0.5, 0.5); polar: angular offset;
  // double-square: global rotation)
  double rotation = 0.0;
  // explicit
  std::vector<Point2> points;

  /// Number of points make_grid will return.
  std::size_t point_count() const;
  void validate() const;

  static GridSpec square(int nx, int ny, double rotation = 0.0);
  static GridSpec polar(int rings, int angular, double rotation = 0.0, bool center = true);
  static GridSpec double_square(double inner_radius, double outer_radius, double rotation);
  static GridSpec explicit_points(std::vector<Point2> points, LatentSpace space);
};

nlohmann::json to_json(const GridSpec& spec);
GridSpec grid_spec_from_json(const nlohmann::json& j);

/// Radius of polar ring k (1-based) out of `rings`: the circle enclosing
/// probability mass k/(rings+1) under the 2D standard normal.
double polar_ring_radius(int k, int rings);

/// Points in spec.space. Throws Error(kDomain) if a square grid rotation
/// pushes a point out of the open unit square.
std::vector<Point2> make_grid(const GridSpec& spec);

/// make_grid converted to uniformed coordinates.
std::vector<Point2> make_grid_uniformed(const GridSpec& spec);

/// Values on a W x H lattice over (0,1)^2. Cell (i, j) -- column i, row j --
/// is centred at ((i + 0.5) / W, (j + 0.5) / H); values are row-major.
struct FieldMap {
  std::string name;
  int width = 0;
  int height = 0;
  std::vector<double> values;

  double& at(int i, int j) { return values[static_cast<std::size_t>(j) * width + i]; }
  double at(int i, int j) const { return values[static_cast<std::size_t>(j) * width + i]; }
  Point2 center(int i, int j) const {
    return {(i + 0.5) / width, (j + 0.5) / height};
  }
  std::vector<Point2> centers() const;
};

/// {"name", "width", "height", "values": [[row 0], [row 1], ...]}
nlohmann::json to_json(const FieldMap& map);

/// CSV with header x,y,value; one row per cell.
void write_field_csv(std::ostream& out, const FieldMap& map);

/// Gaussian KDE on the uniformed square with Scott's bandwidth
/// n^(-1/6) * std per axis, reflected at the borders, normalized so the
/// Riemann sum over the lattice is 1.
FieldMap density_map(std::span<const Point2> uniformed_points, int width, int height);

enum class Aggregation { kSum, kMax };

std::string to_string(Aggregation agg);
Aggregation aggregation_from_string(const std::string& text);

/// Normalized factor levels (rows = points, cols = factors) at uniformed
/// points.
using LevelField = std::function<Eigen::MatrixXd(std::span<const Point2>)>;

/// Gradient metric: central differences (one-sided at edges) of each
/// normalized factor level along both uniformed axes, aggregated by sum or
/// max of the absolute terms.
FieldMap gradient_map(const LevelField& levels, int width, int height, Aggregation agg);

/// Same, decoding each cell with the model. Levels are snapped to declared
/// levels and normalized to [0,1] over each factor's declared range.
FieldMap gradient_map(const vae::VaeModel& model, int width, int height, Aggregation agg);

/// The LevelField used by the model overload.
LevelField model_level_field(const vae::VaeModel& model);

struct BorderCell {
  int i = 0;
  int j = 0;
  Point2 point;
  double value = 0.0;
};

/// Cells with value >= threshold, in row-major order.
std::vector<BorderCell> extract_borders(const FieldMap& map, double threshold);

/// Number of 4-connected components formed by cells with value < threshold.
int count_segments(const FieldMap& map, double threshold);

}  // namespace gdoe
