#include "gdoe/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>

#include "csv.hpp"
#include "gdoe/error.hpp"
#include "gdoe/json_io.hpp"
#include "gdoe/stats.hpp"
#include "gdoe/vae.hpp"

namespace gdoe {

using nlohmann::json;

std::string to_string(LatentSpace space) {
  return space == LatentSpace::kUniformed ? "uniformed" : "original";
}

LatentSpace latent_space_from_string(const std::string& text) {
  if (text == "uniformed") return LatentSpace::kUniformed;
  if (text == "original") return LatentSpace::kOriginal;
  throw Error(ErrorCode::kValidation, "unknown latent space '" + text + "'");
}

std::string to_string(GridType type) {
  switch (type) {
    case GridType::kSquare: return "square";
    case GridType::kPolar: return "polar";
    case GridType::kDoubleSquare: return "double-square";
    case GridType::kExplicit: return "explicit";
  }
  return "?";
}

GridType grid_type_from_string(const std::string& text) {
  for (auto t : {GridType::kSquare, GridType::kPolar, GridType::kDoubleSquare, GridType::kExplicit}) {
    if (to_string(t) == text) return t;
  }
  throw Error(ErrorCode::kValidation, "unknown grid type '" + text + "'");
}

std::size_t GridSpec::point_count() const {
  switch (type) {
    case GridType::kSquare: return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny);
    case GridType::kPolar:
      return static_cast<std::size_t>(rings) * static_cast<std::size_t>(angular) + (center ? 1 : 0);
    case GridType::kDoubleSquare: return 8;
    case GridType::kExplicit: return points.size();
  }
  return 0;
}

void GridSpec::validate() const {
  if (!std::isfinite(rotation)) throw Error(ErrorCode::kValidation, "rotation must be finite");
  switch (type) {
    case GridType::kSquare:
      if (nx < 1 || ny < 1) throw Error(ErrorCode::kValidation, "square grid counts must be >= 1");
      break;
    case GridType::kPolar:
      if (rings < 0 || angular < 1) {
        throw Error(ErrorCode::kValidation, "polar grid needs rings >= 0 and angular >= 1");
      }
      if (point_count() == 0) throw Error(ErrorCode::kValidation, "polar grid has no points");
      break;
    case GridType::kDoubleSquare:
      if (!(inner_radius > 0.0) || !(outer_radius > 0.0) || !std::isfinite(inner_radius) ||
          !std::isfinite(outer_radius)) {
        throw Error(ErrorCode::kValidation, "double-square radii must be positive");
      }
      break;
    case GridType::kExplicit:
      if (points.empty()) throw Error(ErrorCode::kValidation, "explicit grid has no points");
      break;
  }
}

GridSpec GridSpec::square(int nx, int ny, double rotation) {
  GridSpec spec;
  spec.type = GridType::kSquare;
  spec.space = LatentSpace::kUniformed;
  spec.nx = nx;
  spec.ny = ny;
  spec.rotation = rotation;
  return spec;
}

GridSpec GridSpec::polar(int rings, int angular, double rotation, bool center) {
  GridSpec spec;
  spec.type = GridType::kPolar;
  spec.space = LatentSpace::kOriginal;
  spec.rings = rings;
  spec.angular = angular;
  spec.rotation = rotation;
  spec.center = center;
  return spec;
}

GridSpec GridSpec::double_square(double inner_radius, double outer_radius, double rotation) {
  GridSpec spec;
  spec.type = GridType::kDoubleSquare;
  spec.space = LatentSpace::kOriginal;
  spec.inner_radius = inner_radius;
  spec.outer_radius = outer_radius;
  spec.rotation = rotation;
  return spec;
}

GridSpec GridSpec::explicit_points(std::vector<Point2> points, LatentSpace space) {
  GridSpec spec;
  spec.type = GridType::kExplicit;
  spec.space = space;
  spec.points = std::move(points);
  return spec;
}

json to_json(const GridSpec& spec) {
  json j = {{"type", to_string(spec.type)}, {"space", to_string(spec.space)}};
  switch (spec.type) {
    case GridType::kSquare:
      j["nx"] = spec.nx;
      j["ny"] = spec.ny;
      j["rotation"] = spec.rotation;
      break;
    case GridType::kPolar:
      j["rings"] = spec.rings;
      j["angular"] = spec.angular;
      j["center"] = spec.center;
      j["rotation"] = spec.rotation;
      break;
    case GridType::kDoubleSquare:
      j["inner_radius"] = spec.inner_radius;
      j["outer_radius"] = spec.outer_radius;
      j["rotation"] = spec.rotation;
      break;
    case GridType::kExplicit: {
      json points = json::array();
      for (const auto& p : spec.points) points.push_back(to_json(p));
      j["points"] = points;
      break;
    }
  }
  return j;
}

GridSpec grid_spec_from_json(const json& j) {
  GridSpec spec;
  spec.type = grid_type_from_string(j.at("type").get<std::string>());
  const LatentSpace default_space =
      spec.type == GridType::kSquare ? LatentSpace::kUniformed : LatentSpace::kOriginal;
  spec.space = j.contains("space") ? latent_space_from_string(j.at("space").get<std::string>())
                                   : default_space;
  spec.nx = j.value("nx", spec.nx);
  spec.ny = j.value("ny", spec.ny);
  spec.rings = j.value("rings", spec.rings);
  spec.angular = j.value("angular", spec.angular);
  spec.center = j.value("center", spec.center);
  spec.inner_radius = j.value("inner_radius", spec.inner_radius);
  spec.outer_radius = j.value("outer_radius", spec.outer_radius);
  spec.rotation = j.value("rotation", spec.rotation);
  if (j.contains("points")) {
    for (const auto& p : j.at("points")) spec.points.push_back(point_from_json(p));
  }
  spec.validate();
  return spec;
}

double polar_ring_radius(int k, int rings) {
  if (k < 1 || k > rings) throw Error(ErrorCode::kValidation, "ring index out of range");
  return std::sqrt(-2.0 * std::log(1.0 - static_cast<double>(k) / (rings + 1)));
}

namespace {

Point2 rotate(Point2 p, Point2 about, double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  const double dx = p.x - about.x;
  const double dy = p.y - about.y;
  return {about.x + c * dx - s * dy, about.y + s * dx + c * dy};
}

void require_inside_unit_square(std::span<const Point2> points, const char* what) {
  for (const auto& p : points) {
    if (!(p.x > 0.0 && p.x < 1.0 && p.y > 0.0 && p.y < 1.0)) {
      throw Error(ErrorCode::kDomain, std::string(what) +
                                          " places a point outside the open unit square");
    }
  }
}

}  // namespace

std::vector<Point2> make_grid(const GridSpec& spec) {
  spec.validate();
  std::vector<Point2> out;
  const bool uniformed = spec.space == LatentSpace::kUniformed;
  // Centre of the pattern in its own space.
  const Point2 origin = uniformed ? Point2{0.5, 0.5} : Point2{0.0, 0.0};

  switch (spec.type) {
    case GridType::kSquare: {
      // Uniformed: cell centres of the unit square. Original: the same
      // lattice stretched over [-2, 2]^2.
      const double lo = uniformed ? 0.0 : -2.0;
      const double span = uniformed ? 1.0 : 4.0;
      for (int j = 0; j < spec.ny; ++j) {
        for (int i = 0; i < spec.nx; ++i) {
          const Point2 p{lo + span * (i + 0.5) / spec.nx, lo + span * (j + 0.5) / spec.ny};
          out.push_back(spec.rotation == 0.0 ? p : rotate(p, origin, spec.rotation));
        }
      }
      break;
    }
    case GridType::kPolar: {
      if (spec.center) out.push_back(origin);
      for (int k = 1; k <= spec.rings; ++k) {
        // Uniformed space uses equal-area rings of the inscribed disc.
        const double r = uniformed ? 0.5 * std::sqrt(static_cast<double>(k) / (spec.rings + 1))
                                   : polar_ring_radius(k, spec.rings);
        for (int a = 0; a < spec.angular; ++a) {
          const double theta = spec.rotation + 2.0 * std::numbers::pi * a / spec.angular;
          out.push_back({origin.x + r * std::cos(theta), origin.y + r * std::sin(theta)});
        }
      }
      break;
    }
    case GridType::kDoubleSquare: {
      const double quarter = std::numbers::pi / 2.0;
      for (int k = 0; k < 4; ++k) {
        const double theta = spec.rotation + k * quarter;
        out.push_back({origin.x + spec.inner_radius * std::cos(theta),
                       origin.y + spec.inner_radius * std::sin(theta)});
      }
      for (int k = 0; k < 4; ++k) {
        const double theta = spec.rotation + std::numbers::pi / 4.0 + k * quarter;
        out.push_back({origin.x + spec.outer_radius * std::cos(theta),
                       origin.y + spec.outer_radius * std::sin(theta)});
      }
      break;
    }
    case GridType::kExplicit:
      out = spec.points;
      break;
  }
  if (uniformed) require_inside_unit_square(out, to_string(spec.type).c_str());
  return out;
}

std::vector<Point2> make_grid_uniformed(const GridSpec& spec) {
  const auto points = make_grid(spec);
  return vae::to_uniformed(points, spec.space);
}

std::vector<Point2> FieldMap::centers() const {
  std::vector<Point2> out;
  out.reserve(values.size());
  for (int j = 0; j < height; ++j) {
    for (int i = 0; i < width; ++i) out.push_back(center(i, j));
  }
  return out;
}

json to_json(const FieldMap& map) {
  json rows = json::array();
  for (int j = 0; j < map.height; ++j) {
    const auto begin = map.values.begin() + static_cast<std::ptrdiff_t>(j) * map.width;
    rows.push_back(std::vector<double>(begin, begin + map.width));
  }
  return {{"name", map.name}, {"width", map.width}, {"height", map.height}, {"values", rows}};
}

void write_field_csv(std::ostream& out, const FieldMap& map) {
  out << "x,y,value\n";
  for (int j = 0; j < map.height; ++j) {
    for (int i = 0; i < map.width; ++i) {
      const Point2 c = map.center(i, j);
      out << csv::format_double(c.x) << ',' << csv::format_double(c.y) << ','
          << csv::format_double(map.at(i, j)) << '\n';
    }
  }
}

namespace {

void check_resolution(int width, int height, int minimum) {
  if (width < minimum || height < minimum) {
    throw Error(ErrorCode::kValidation,
                "map resolution must be at least " + std::to_string(minimum) + " per axis");
  }
}

double sample_std(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

// Kernel weights of every point at every lattice coordinate along one axis,
// with mirror images at 0 and 1.
Eigen::MatrixXd axis_kernel(std::span<const double> coords, int cells, double bandwidth) {
  Eigen::MatrixXd k(static_cast<Eigen::Index>(coords.size()), cells);
  const double norm = 1.0 / (bandwidth * std::sqrt(2.0 * std::numbers::pi));
  for (std::size_t p = 0; p < coords.size(); ++p) {
    const double c = coords[p];
    for (int i = 0; i < cells; ++i) {
      const double x = (i + 0.5) / cells;
      double sum = 0.0;
      for (const double image : {c, -c, 2.0 - c}) {
        const double u = (x - image) / bandwidth;
        sum += std::exp(-0.5 * u * u);
      }
      k(static_cast<Eigen::Index>(p), i) = norm * sum;
    }
  }
  return k;
}

}  // namespace

FieldMap density_map(std::span<const Point2> points, int width, int height) {
  if (points.empty()) throw Error(ErrorCode::kValidation, "density_map needs at least one point");
  check_resolution(width, height, 1);
  std::vector<double> xs;
  std::vector<double> ys;
  for (const auto& p : points) {
    if (!(p.x >= 0.0 && p.x <= 1.0 && p.y >= 0.0 && p.y <= 1.0)) {
      throw Error(ErrorCode::kDomain, "density_map expects uniformed points in [0,1]^2");
    }
    xs.push_back(p.x);
    ys.push_back(p.y);
  }
  const double scott = std::pow(static_cast<double>(points.size()), -1.0 / 6.0);
  // Degenerate spreads (one point, identical coordinates) fall back to half a cell.
  const double hx = std::max(scott * sample_std(xs), 0.5 / width);
  const double hy = std::max(scott * sample_std(ys), 0.5 / height);

  const Eigen::MatrixXd kx = axis_kernel(xs, width, hx);
  const Eigen::MatrixXd ky = axis_kernel(ys, height, hy);
  const Eigen::MatrixXd grid = ky.transpose() * kx;  // height x width

  FieldMap map;
  map.name = "density";
  map.width = width;
  map.height = height;
  map.values.resize(static_cast<std::size_t>(width) * height);
  double total = 0.0;
  for (int j = 0; j < height; ++j) {
    for (int i = 0; i < width; ++i) {
      map.at(i, j) = grid(j, i);
      total += grid(j, i);
    }
  }
  const double cell_area = 1.0 / (static_cast<double>(width) * height);
  for (double& v : map.values) v /= total * cell_area;
  return map;
}

std::string to_string(Aggregation agg) { return agg == Aggregation::kSum ? "sum" : "max"; }

Aggregation aggregation_from_string(const std::string& text) {
  if (text == "sum") return Aggregation::kSum;
  if (text == "max") return Aggregation::kMax;
  throw Error(ErrorCode::kValidation, "unknown aggregation '" + text + "'");
}

FieldMap gradient_map(const LevelField& levels, int width, int height, Aggregation agg) {
  check_resolution(width, height, 3);
  FieldMap map;
  map.name = "gradient-" + to_string(agg);
  map.width = width;
  map.height = height;
  map.values.assign(static_cast<std::size_t>(width) * height, 0.0);

  const auto centers = map.centers();
  const Eigen::MatrixXd f = levels(centers);
  if (f.rows() != static_cast<Eigen::Index>(centers.size())) {
    throw Error(ErrorCode::kShape, "level field returned the wrong number of rows");
  }
  auto level = [&](int i, int j, Eigen::Index factor) {
    return f(static_cast<Eigen::Index>(j) * width + i, factor);
  };
  const double dx = 1.0 / width;
  const double dy = 1.0 / height;
  for (int j = 0; j < height; ++j) {
    for (int i = 0; i < width; ++i) {
      double acc = 0.0;
      for (Eigen::Index k = 0; k < f.cols(); ++k) {
        double gx = 0.0;
        if (i == 0) {
          gx = (level(1, j, k) - level(0, j, k)) / dx;
        } else if (i == width - 1) {
          gx = (level(i, j, k) - level(i - 1, j, k)) / dx;
        } else {
          gx = (level(i + 1, j, k) - level(i - 1, j, k)) / (2.0 * dx);
        }
        double gy = 0.0;
        if (j == 0) {
          gy = (level(i, 1, k) - level(i, 0, k)) / dy;
        } else if (j == height - 1) {
          gy = (level(i, j, k) - level(i, j - 1, k)) / dy;
        } else {
          gy = (level(i, j + 1, k) - level(i, j - 1, k)) / (2.0 * dy);
        }
        if (agg == Aggregation::kSum) {
          acc += std::fabs(gx) + std::fabs(gy);
        } else {
          acc = std::max({acc, std::fabs(gx), std::fabs(gy)});
        }
      }
      map.at(i, j) = acc;
    }
  }
  return map;
}

LevelField model_level_field(const vae::VaeModel& model) {
  return [&model](std::span<const Point2> points) {
    const Eigen::MatrixXd decoded = vae::decode_points(model, points, LatentSpace::kUniformed);
    const ColumnMap& map = model.column_map;
    Eigen::MatrixXd out(decoded.rows(), static_cast<Eigen::Index>(map.factors.size()));
    std::vector<double> row(map.width());
    std::vector<double> snapped(map.width());
    for (Eigen::Index r = 0; r < decoded.rows(); ++r) {
      for (std::size_t c = 0; c < row.size(); ++c) row[c] = decoded(r, static_cast<Eigen::Index>(c));
      const Trial trial = decode_vector(row, map, /*snap=*/true);
      map.encode_trial(trial, snapped);
      for (std::size_t f = 0; f < map.factors.size(); ++f) {
        out(r, static_cast<Eigen::Index>(f)) = map.normalized_level(f, snapped);
      }
    }
    return out;
  };
}

FieldMap gradient_map(const vae::VaeModel& model, int width, int height, Aggregation agg) {
  return gradient_map(model_level_field(model), width, height, agg);
}

std::vector<BorderCell> extract_borders(const FieldMap& map, double threshold) {
  if (!(threshold >= 0.0)) throw Error(ErrorCode::kValidation, "threshold must be nonnegative");
  std::vector<BorderCell> out;
  for (int j = 0; j < map.height; ++j) {
    for (int i = 0; i < map.width; ++i) {
      if (map.at(i, j) >= threshold) out.push_back({i, j, map.center(i, j), map.at(i, j)});
    }
  }
  return out;
}

int count_segments(const FieldMap& map, double threshold) {
  std::vector<int> label(map.values.size(), -1);
  int segments = 0;
  std::vector<std::pair<int, int>> stack;
  for (int j = 0; j < map.height; ++j) {
    for (int i = 0; i < map.width; ++i) {
      const auto idx = static_cast<std::size_t>(j) * map.width + i;
      if (label[idx] >= 0 || map.values[idx] >= threshold) continue;
      stack.push_back({i, j});
      label[idx] = segments;
      while (!stack.empty()) {
        const auto [ci, cj] = stack.back();
        stack.pop_back();
        const std::pair<int, int> next[] = {{ci + 1, cj}, {ci - 1, cj}, {ci, cj + 1}, {ci, cj - 1}};
        for (const auto& [ni, nj] : next) {
          if (ni < 0 || nj < 0 || ni >= map.width || nj >= map.height) continue;
          const auto nidx = static_cast<std::size_t>(nj) * map.width + ni;
          if (label[nidx] >= 0 || map.values[nidx] >= threshold) continue;
          label[nidx] = segments;
          stack.push_back({ni, nj});
        }
      }
      ++segments;
    }
  }
  return segments;
}

}  // namespace gdoe
