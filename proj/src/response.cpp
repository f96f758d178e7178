#include "gdoe/response.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <numeric>
#include <random>

#include "csv.hpp"
#include "gdoe/error.hpp"
#include "gdoe/json_io.hpp"
#include "gdoe/nn.hpp"
#include "gdoe/stats.hpp"

namespace gdoe {

nlohmann::json to_json(const ResponseRecord& r) {
  return {{"trial_id", r.trial_id}, {"replicates", r.replicates}, {"mean", r.mean},
          {"std", r.std_dev},       {"confidence", r.confidence}, {"lcl", r.lcl}};
}

ResponseRecord response_record_from_json(const nlohmann::json& j) {
  const auto reps = j.at("replicates").get<std::vector<double>>();
  return compute_lcl(reps, j.value("confidence", 0.90), j.at("trial_id").get<std::int64_t>());
}

ResponseRecord compute_lcl(std::span<const double> replicates, double confidence,
                           std::int64_t trial_id) {
  if (replicates.size() < 2) {
    throw Error(ErrorCode::kInsufficientData,
                "trial " + std::to_string(trial_id) + " needs at least 2 replicates, got " +
                    std::to_string(replicates.size()));
  }
  if (!(confidence > 0.0 && confidence < 1.0)) {
    throw Error(ErrorCode::kValidation, "confidence must be in (0, 1)");
  }
  for (const double v : replicates) {
    if (!std::isfinite(v)) throw Error(ErrorCode::kValidation, "replicate values must be finite");
  }
  ResponseRecord r;
  r.trial_id = trial_id;
  r.replicates.assign(replicates.begin(), replicates.end());
  r.confidence = confidence;
  const double n = static_cast<double>(replicates.size());
  r.mean = std::accumulate(replicates.begin(), replicates.end(), 0.0) / n;
  double ss = 0.0;
  for (const double v : replicates) ss += (v - r.mean) * (v - r.mean);
  r.std_dev = std::sqrt(ss / (n - 1.0));
  const double t = stats::student_t_quantile(confidence, n - 1.0);
  r.lcl = r.mean - t * r.std_dev / std::sqrt(n);
  return r;
}

std::vector<ResponseRecord> read_responses_csv(std::istream& in, double confidence) {
  std::vector<ResponseRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (csv::next_line(in, line)) {
    ++line_no;
    if (csv::trim(line).empty()) continue;
    const auto fields = csv::split_line(line);
    if (line_no == 1 && csv::trim(fields[0]) == "trial_id") continue;
    auto number = [&](std::string_view field) {
      double v = 0.0;
      if (!csv::parse_double(csv::trim(field), v)) {
        throw Error(ErrorCode::kValidation, "responses line " + std::to_string(line_no) +
                                                ": '" + std::string(field) + "' is not a number");
      }
      return v;
    };
    const auto id = static_cast<std::int64_t>(number(fields[0]));
    std::vector<double> reps;
    for (std::size_t k = 1; k < fields.size(); ++k) {
      if (csv::trim(fields[k]).empty()) continue;
      reps.push_back(number(fields[k]));
    }
    out.push_back(compute_lcl(reps, confidence, id));
  }
  return out;
}

namespace {

double orient(Point2 a, Point2 b, Point2 c) {
  return (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
}

// > 0 when d lies strictly inside the circumcircle of counter-clockwise abc.
double in_circle(Point2 a, Point2 b, Point2 c, Point2 d) {
  const double adx = a.x - d.x, ady = a.y - d.y;
  const double bdx = b.x - d.x, bdy = b.y - d.y;
  const double cdx = c.x - d.x, cdy = c.y - d.y;
  const double ad = adx * adx + ady * ady;
  const double bd = bdx * bdx + bdy * bdy;
  const double cd = cdx * cdx + cdy * cdy;
  return ad * (bdx * cdy - cdx * bdy) - bd * (adx * cdy - cdx * ady) +
         cd * (adx * bdy - bdx * ady);
}

}  // namespace

namespace {

// Vertices with duplicate coordinates merged and their values averaged.
Triangulation merge_points(std::span<const Point2> points, std::span<const double> values) {
  if (points.size() != values.size()) {
    throw Error(ErrorCode::kShape, "points and values differ in length");
  }
  Triangulation tri;
  std::map<std::pair<double, double>, std::size_t> seen;
  std::vector<std::size_t> counts;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!std::isfinite(points[i].x) || !std::isfinite(points[i].y) || !std::isfinite(values[i])) {
      throw Error(ErrorCode::kDomain, "triangulation input must be finite");
    }
    const auto [it, fresh] = seen.emplace(std::pair{points[i].x, points[i].y}, tri.vertices.size());
    if (fresh) {
      tri.vertices.push_back(points[i]);
      tri.values.push_back(values[i]);
      counts.push_back(1);
    } else {
      tri.values[it->second] += values[i];
      ++counts[it->second];
    }
  }
  for (std::size_t v = 0; v < tri.values.size(); ++v) {
    tri.values[v] /= static_cast<double>(counts[v]);
  }
  return tri;
}

Surface fill_surface(Triangulation tri, int resolution) {
  if (resolution < 1) throw Error(ErrorCode::kValidation, "resolution must be positive");
  Surface s;
  s.triangulation = std::move(tri);
  s.map.name = "response";
  s.map.width = resolution;
  s.map.height = resolution;
  s.map.values.resize(static_cast<std::size_t>(resolution) * resolution);
  s.interior.resize(s.map.values.size());
  for (int j = 0; j < resolution; ++j) {
    for (int i = 0; i < resolution; ++i) {
      bool inside = false;
      s.map.at(i, j) = interpolate_at(s.triangulation, s.map.center(i, j), &inside);
      s.interior[static_cast<std::size_t>(j) * resolution + i] = inside ? 1 : 0;
    }
  }
  return s;
}

}  // namespace

Triangulation triangulate(std::span<const Point2> points, std::span<const double> values) {
  Triangulation tri = merge_points(points, values);
  const std::size_t n = tri.vertices.size();
  if (n < 3) throw Error(ErrorCode::kTriangulation, "need at least 3 distinct points");

  double min_x = tri.vertices[0].x, max_x = min_x, min_y = tri.vertices[0].y, max_y = min_y;
  for (const auto& p : tri.vertices) {
    min_x = std::min(min_x, p.x);
    max_x = std::max(max_x, p.x);
    min_y = std::min(min_y, p.y);
    max_y = std::max(max_y, p.y);
  }
  const double span = std::max(max_x - min_x, max_y - min_y);
  {
    // Collinearity relative to the farthest pair from the first point.
    std::size_t far = 1;
    for (std::size_t i = 1; i < n; ++i) {
      const auto d = [&](std::size_t k) {
        return std::hypot(tri.vertices[k].x - tri.vertices[0].x,
                          tri.vertices[k].y - tri.vertices[0].y);
      };
      if (d(i) > d(far)) far = i;
    }
    bool collinear = true;
    for (std::size_t i = 1; i < n && collinear; ++i) {
      if (std::abs(orient(tri.vertices[0], tri.vertices[far], tri.vertices[i])) >
          1e-12 * span * span) {
        collinear = false;
      }
    }
    if (collinear) throw Error(ErrorCode::kTriangulation, "all points are collinear");
  }

  // Super triangle vertices are n, n+1, n+2.
  const double cx = 0.5 * (min_x + max_x);
  const double cy = 0.5 * (min_y + max_y);
  const double m = 100.0 * span;
  std::vector<Point2> pts = tri.vertices;
  pts.push_back({cx - 2.0 * m, cy - m});
  pts.push_back({cx + 2.0 * m, cy - m});
  pts.push_back({cx, cy + 2.0 * m});
  std::vector<std::array<std::size_t, 3>> tris{{n, n + 1, n + 2}};

  for (std::size_t p = 0; p < n; ++p) {
    std::vector<std::array<std::size_t, 3>> keep;
    std::map<std::pair<std::size_t, std::size_t>, int> edges;  // directed, counted undirected
    std::vector<std::pair<std::size_t, std::size_t>> order;
    for (const auto& t : tris) {
      if (in_circle(pts[t[0]], pts[t[1]], pts[t[2]], pts[p]) > 0.0) {
        for (int e = 0; e < 3; ++e) {
          const std::size_t a = t[e], b = t[(e + 1) % 3];
          const auto key = std::minmax(a, b);
          if (edges[key]++ == 0) order.emplace_back(a, b);
        }
      } else {
        keep.push_back(t);
      }
    }
    for (const auto& [a, b] : order) {
      if (edges[std::minmax(a, b)] == 1) keep.push_back({a, b, p});
    }
    tris = std::move(keep);
  }
  for (const auto& t : tris) {
    if (t[0] < n && t[1] < n && t[2] < n && orient(pts[t[0]], pts[t[1]], pts[t[2]]) > 0.0) {
      tri.triangles.push_back(t);
    }
  }
  if (tri.triangles.empty()) throw Error(ErrorCode::kTriangulation, "degenerate point set");
  return tri;
}

double interpolate_at(const Triangulation& tri, Point2 p, bool* interior) {
  constexpr double kTol = 1e-12;
  for (const auto& t : tri.triangles) {
    const Point2 a = tri.vertices[t[0]], b = tri.vertices[t[1]], c = tri.vertices[t[2]];
    if (p.x < std::min({a.x, b.x, c.x}) - kTol || p.x > std::max({a.x, b.x, c.x}) + kTol ||
        p.y < std::min({a.y, b.y, c.y}) - kTol || p.y > std::max({a.y, b.y, c.y}) + kTol) {
      continue;
    }
    const double det = orient(a, b, c);
    const double w0 = orient(p, b, c) / det;
    const double w1 = orient(a, p, c) / det;
    const double w2 = orient(a, b, p) / det;
    if (w0 >= -kTol && w1 >= -kTol && w2 >= -kTol) {
      if (interior != nullptr) *interior = true;
      return w0 * tri.values[t[0]] + w1 * tri.values[t[1]] + w2 * tri.values[t[2]];
    }
  }
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t v = 0; v < tri.vertices.size(); ++v) {
    const double dx = tri.vertices[v].x - p.x, dy = tri.vertices[v].y - p.y;
    const double d = dx * dx + dy * dy;
    if (d < best_d) {
      best = v;
      best_d = d;
    }
  }
  if (interior != nullptr) *interior = false;
  return tri.values[best];
}

nlohmann::json to_json(const Surface& surface) {
  nlohmann::json out = to_json(surface.map);
  nlohmann::json interior = nlohmann::json::array();
  for (int j = 0; j < surface.map.height; ++j) {
    nlohmann::json row = nlohmann::json::array();
    for (int i = 0; i < surface.map.width; ++i) {
      row.push_back(surface.interior[static_cast<std::size_t>(j) * surface.map.width + i] != 0);
    }
    interior.push_back(std::move(row));
  }
  out["interior"] = std::move(interior);
  out["nearest_only"] = surface.nearest_only;
  out["vertices"] = surface.triangulation.vertices.size();
  out["triangles"] = surface.triangulation.triangles.size();
  return out;
}

Surface interpolate(std::span<const Point2> uniformed, std::span<const double> values,
                    int resolution) {
  if (resolution < 1) throw Error(ErrorCode::kValidation, "resolution must be positive");
  return fill_surface(triangulate(uniformed, values), resolution);
}

Surface interpolate_nearest(std::span<const Point2> uniformed, std::span<const double> values,
                            int resolution) {
  Triangulation tri = merge_points(uniformed, values);
  if (tri.vertices.empty()) throw Error(ErrorCode::kInsufficientData, "no points to interpolate");
  Surface s = fill_surface(std::move(tri), resolution);
  s.nearest_only = true;
  return s;
}

std::string to_string(Goal goal) { return goal == Goal::kMax ? "max" : "min"; }

Goal goal_from_string(const std::string& text) {
  if (text == "max") return Goal::kMax;
  if (text == "min") return Goal::kMin;
  throw Error(ErrorCode::kValidation, "goal must be max or min, got '" + text + "'");
}

Optimum find_optimum(const Surface& surface, Goal goal) {
  const auto& map = surface.map;
  if (map.values.empty()) throw Error(ErrorCode::kState, "empty surface");
  Optimum best;
  best.value = map.at(0, 0);
  for (int j = 0; j < map.height; ++j) {
    for (int i = 0; i < map.width; ++i) {
      const double v = map.at(i, j);
      if (goal == Goal::kMax ? v > best.value : v < best.value) {
        best.i = i;
        best.j = j;
        best.value = v;
      }
    }
  }
  best.point = map.center(best.i, best.j);
  return best;
}

std::size_t best_index(std::span<const double> values, Goal goal) {
  if (values.empty()) throw Error(ErrorCode::kInsufficientData, "no values");
  std::size_t best = 0;
  for (std::size_t k = 1; k < values.size(); ++k) {
    if (goal == Goal::kMax ? values[k] > values[best] : values[k] < values[best]) best = k;
  }
  return best;
}

nlohmann::json to_json(const ImportanceResult& r) {
  nlohmann::json factors = nlohmann::json::array();
  for (std::size_t f = 0; f < r.factors.size(); ++f) {
    factors.push_back({{"name", r.factors[f]}, {"score", r.scores[f]}});
  }
  std::vector<std::string> ranking;
  for (const auto f : r.ranking) ranking.push_back(r.factors[f]);
  return {{"factors", factors}, {"ranking", ranking}, {"base_loss", r.base_loss}};
}

ImportanceResult importance(const Design& design, std::span<const double> responses,
                            const ImportanceConfig& config) {
  if (config.replications == 0) {
    throw Error(ErrorCode::kValidation, "replications must be at least 1");
  }
  if (config.epochs == 0 || config.batch_size == 0) {
    throw Error(ErrorCode::kValidation, "epochs and batch size must be positive");
  }
  if (responses.size() != design.size()) {
    throw Error(ErrorCode::kShape, "one response per trial is required");
  }
  if (design.size() < 2) throw Error(ErrorCode::kInsufficientData, "need at least 2 trials");
  const auto [lo, hi] = std::minmax_element(responses.begin(), responses.end());
  if (*lo == *hi) {
    throw Error(ErrorCode::kInsufficientData, "importance is undefined for a constant response");
  }

  const EncodedMatrix encoded = encode_design(design);
  const Eigen::Index d = encoded.rows.cols();
  const Eigen::Index n = encoded.rows.rows();
  Eigen::MatrixXd xy(n, d + 1);
  xy.leftCols(d) = encoded.rows;
  const double mean = std::accumulate(responses.begin(), responses.end(), 0.0) /
                      static_cast<double>(n);
  double var = 0.0;
  for (const double v : responses) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / static_cast<double>(n));
  for (Eigen::Index r = 0; r < n; ++r) {
    xy(r, d) = (responses[static_cast<std::size_t>(r)] - mean) / sd;
  }
  const bool small = design.size() <= 64;
  std::mt19937_64 rng(config.seed);
  const SplitMatrices split =
      duplicate_and_split(xy, small ? 50 : 5, small ? 30 : 3, NoiseConfig{}, rng());

  nn::Regularization reg;
  reg.kernel_l1 = 1e-5;
  reg.kernel_l2 = 1e-4;
  reg.bias_l2 = 1e-4;
  reg.activity_l2 = 1e-5;
  const std::vector<nn::LayerSpec> layers{{16, nn::Activation::kRelu, reg},
                                          {4, nn::Activation::kRelu, reg},
                                          {1, nn::Activation::kLinear, {}}};
  nn::DenseNet net = nn::DenseNet::create(d, layers, rng, nn::Init::kNormal005);
  nn::AdamState adam;
  adam.learning_rate = config.learning_rate;
  auto params = nn::parameter_views(net, "importance");

  const Eigen::Index rows = split.train.rows();
  const auto batch = static_cast<Eigen::Index>(config.batch_size);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    for (Eigen::Index start = 0; start < rows; start += batch) {
      const Eigen::Index len = std::min(batch, rows - start);
      const nn::Matrix x = split.train.block(start, 0, len, d);
      const nn::Matrix y = split.train.block(start, d, len, 1);
      nn::ForwardCache cache;
      const nn::Matrix pred = nn::forward(net, x, &cache);
      const auto loss = nn::mse(pred, y);
      if (!std::isfinite(loss.value)) {
        throw TrainingError(epoch, "importance model loss is not finite");
      }
      nn::Gradients grads = nn::backward(net, cache, loss.grad);
      auto gviews = nn::gradient_views(grads, "importance");
      nn::adam_step(params, gviews, adam);
    }
  }

  const nn::Matrix x_eval = split.test.leftCols(d);
  const nn::Matrix y_eval = split.test.col(d);
  ImportanceResult result;
  result.base_loss = nn::mse(nn::forward(net, x_eval), y_eval).value;
  const ColumnMap& map = encoded.column_map;
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(x_eval.rows()));
  for (std::size_t f = 0; f < map.factors.size(); ++f) {
    const auto& block = map.blocks[f];
    double total = 0.0;
    for (std::size_t rep = 0; rep < config.replications; ++rep) {
      std::iota(perm.begin(), perm.end(), Eigen::Index{0});
      std::shuffle(perm.begin(), perm.end(), rng);
      nn::Matrix shuffled = x_eval;
      for (Eigen::Index r = 0; r < x_eval.rows(); ++r) {
        shuffled.block(r, static_cast<Eigen::Index>(block.offset), 1,
                       static_cast<Eigen::Index>(block.width)) =
            x_eval.block(perm[static_cast<std::size_t>(r)],
                         static_cast<Eigen::Index>(block.offset), 1,
                         static_cast<Eigen::Index>(block.width));
      }
      const double loss = nn::mse(nn::forward(net, shuffled), y_eval).value;
      total += (loss - result.base_loss) / result.base_loss;
    }
    result.factors.push_back(map.factors[f].name);
    result.scores.push_back(total / static_cast<double>(config.replications));
  }
  result.ranking.resize(result.scores.size());
  std::iota(result.ranking.begin(), result.ranking.end(), std::size_t{0});
  std::stable_sort(result.ranking.begin(), result.ranking.end(), [&](std::size_t a, std::size_t b) {
    return result.scores[a] > result.scores[b];
  });
  return result;
}

}  // namespace gdoe
