#include "gdoe/clustering.hpp"

#include <algorithm>
#include <limits>
#include <random>

#include "gdoe/error.hpp"
#include "gdoe/json_io.hpp"

namespace gdoe {

std::string to_string(ClusterMethod method) {
  return method == ClusterMethod::kKMeans ? "kmeans" : "ward";
}

ClusterMethod cluster_method_from_string(const std::string& text) {
  if (text == "kmeans") return ClusterMethod::kKMeans;
  if (text == "ward") return ClusterMethod::kWard;
  throw Error(ErrorCode::kValidation, "unknown clustering method '" + text + "'");
}

nlohmann::json to_json(const Clustering& clustering) {
  nlohmann::json centroids = nlohmann::json::array();
  for (const auto& c : clustering.centroids) centroids.push_back(to_json(c));
  return {{"method", to_string(clustering.method)},
          {"k", clustering.k},
          {"assignments", clustering.assignments},
          {"centroids", centroids},
          {"inertia", clustering.inertia},
          {"iterations", clustering.iterations}};
}

namespace {

double sq_distance(Point2 a, Point2 b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  return dx * dx + dy * dy;
}

std::size_t distinct_count(std::span<const Point2> points) {
  std::vector<std::pair<double, double>> sorted;
  sorted.reserve(points.size());
  for (const auto& p : points) sorted.emplace_back(p.x, p.y);
  std::sort(sorted.begin(), sorted.end());
  return static_cast<std::size_t>(std::unique(sorted.begin(), sorted.end()) - sorted.begin());
}

std::vector<Point2> member_means(std::span<const Point2> points,
                                 std::span<const std::size_t> assignments, std::size_t k,
                                 std::vector<std::size_t>* counts_out = nullptr) {
  std::vector<Point2> sums(k);
  std::vector<std::size_t> counts(k, 0);
  for (std::size_t i = 0; i < points.size(); ++i) {
    sums[assignments[i]].x += points[i].x;
    sums[assignments[i]].y += points[i].y;
    ++counts[assignments[i]];
  }
  for (std::size_t c = 0; c < k; ++c) {
    if (counts[c] > 0) {
      sums[c].x /= static_cast<double>(counts[c]);
      sums[c].y /= static_cast<double>(counts[c]);
    }
  }
  if (counts_out != nullptr) *counts_out = std::move(counts);
  return sums;
}

void check_points(std::span<const Point2> points, std::size_t k) {
  if (k < 1) throw Error(ErrorCode::kValidation, "k must be at least 1");
  for (const auto& p : points) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
      throw Error(ErrorCode::kDomain, "cluster points must be finite");
    }
  }
}

}  // namespace

double partition_inertia(std::span<const Point2> points, std::span<const std::size_t> assignments,
                         std::size_t k) {
  const auto means = member_means(points, assignments, k);
  double total = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    total += sq_distance(points[i], means[assignments[i]]);
  }
  return total;
}

std::vector<std::size_t> canonical_labels(std::span<const std::size_t> assignments) {
  std::vector<std::size_t> relabel;
  std::vector<std::size_t> out;
  out.reserve(assignments.size());
  for (const auto a : assignments) {
    if (a >= relabel.size()) relabel.resize(a + 1, std::numeric_limits<std::size_t>::max());
    if (relabel[a] == std::numeric_limits<std::size_t>::max()) {
      relabel[a] = static_cast<std::size_t>(
          std::count_if(relabel.begin(), relabel.end(),
                        [](std::size_t v) { return v != std::numeric_limits<std::size_t>::max(); }));
    }
    out.push_back(relabel[a]);
  }
  return out;
}

Clustering kmeans(std::span<const Point2> points, std::size_t k, std::uint64_t seed,
                  std::size_t max_iter) {
  check_points(points, k);
  if (k > distinct_count(points)) {
    throw Error(ErrorCode::kValidation, "k = " + std::to_string(k) + " exceeds the " +
                                            std::to_string(distinct_count(points)) +
                                            " distinct points");
  }
  const std::size_t n = points.size();
  std::mt19937_64 rng(seed);

  // k-means++ seeding.
  std::vector<Point2> centroids;
  centroids.push_back(points[std::uniform_int_distribution<std::size_t>(0, n - 1)(rng)]);
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  while (centroids.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      nearest[i] = std::min(nearest[i], sq_distance(points[i], centroids.back()));
      total += nearest[i];
    }
    double target = std::uniform_real_distribution<double>(0.0, total)(rng);
    std::size_t pick = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (nearest[i] <= 0.0) continue;
      pick = i;
      target -= nearest[i];
      if (target < 0.0) break;
    }
    centroids.push_back(points[pick]);
  }

  Clustering result;
  result.method = ClusterMethod::kKMeans;
  result.k = k;
  std::vector<std::size_t> assignment(n, k);
  for (std::size_t iter = 0; iter < std::max<std::size_t>(max_iter, 1); ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      double best_d = sq_distance(points[i], centroids[0]);
      for (std::size_t c = 1; c < k; ++c) {
        const double d = sq_distance(points[i], centroids[c]);
        if (d < best_d) {
          best = c;
          best_d = d;
        }
      }
      if (assignment[i] != best) {
        assignment[i] = best;
        changed = true;
      }
    }
    std::vector<std::size_t> counts;
    centroids = member_means(points, assignment, k, &counts);
    // Repair empty clusters from the largest one.
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] > 0) continue;
      const auto largest = static_cast<std::size_t>(
          std::max_element(counts.begin(), counts.end()) - counts.begin());
      std::size_t far = n;
      double far_d = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (assignment[i] != largest) continue;
        const double d = sq_distance(points[i], centroids[largest]);
        if (d > far_d) {
          far = i;
          far_d = d;
        }
      }
      assignment[far] = c;
      centroids = member_means(points, assignment, k, &counts);
      changed = true;
    }
    result.iterations = iter + 1;
    result.inertia_history.push_back(partition_inertia(points, assignment, k));
    if (!changed) break;
  }
  result.assignments = assignment;
  result.centroids = centroids;
  result.inertia = result.inertia_history.back();
  return result;
}

Clustering ward(std::span<const Point2> points, std::size_t k) {
  check_points(points, k);
  const std::size_t n = points.size();
  if (k > n) {
    throw Error(ErrorCode::kValidation, "k = " + std::to_string(k) + " exceeds the " +
                                            std::to_string(n) + " points");
  }
  constexpr double kInf = std::numeric_limits<double>::infinity();

  // cost[i * n + j] for i < j: Ward merge cost of clusters i and j. A merged
  // cluster keeps the lower index.
  std::vector<double> cost(n * n, kInf);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) cost[i * n + j] = 0.5 * sq_distance(points[i], points[j]);
  }
  auto at = [&](std::size_t a, std::size_t b) -> double& {
    return a < b ? cost[a * n + b] : cost[b * n + a];
  };
  std::vector<bool> active(n, true);
  std::vector<std::size_t> size(n, 1);
  std::vector<std::size_t> parent(n);
  for (std::size_t i = 0; i < n; ++i) parent[i] = i;

  // Row minimum over j > i, ties to the lowest j.
  std::vector<std::size_t> nn(n, n);
  std::vector<double> nn_cost(n, kInf);
  auto refresh = [&](std::size_t i) {
    nn[i] = n;
    nn_cost[i] = kInf;
    for (std::size_t j = i + 1; j < n; ++j) {
      if (active[j] && cost[i * n + j] < nn_cost[i]) {
        nn[i] = j;
        nn_cost[i] = cost[i * n + j];
      }
    }
  };
  for (std::size_t i = 0; i < n; ++i) refresh(i);

  for (std::size_t clusters = n; clusters > k; --clusters) {
    std::size_t a = n;
    double best = kInf;
    for (std::size_t i = 0; i < n; ++i) {
      if (active[i] && nn[i] < n && nn_cost[i] < best) {
        a = i;
        best = nn_cost[i];
      }
    }
    const std::size_t b = nn[a];
    const double ab = best;
    const double na = static_cast<double>(size[a]);
    const double nb = static_cast<double>(size[b]);
    for (std::size_t c = 0; c < n; ++c) {
      if (!active[c] || c == a || c == b) continue;
      const double nc = static_cast<double>(size[c]);
      at(a, c) = ((na + nc) * at(a, c) + (nb + nc) * at(b, c) - nc * ab) / (na + nb + nc);
    }
    active[b] = false;
    size[a] += size[b];
    parent[b] = a;
    // Rows whose cached minimum may have changed.
    for (std::size_t c = 0; c < n; ++c) {
      if (!active[c]) continue;
      if (c == a || nn[c] == a || nn[c] == b) {
        refresh(c);
      } else if (c < a) {
        const double v = cost[c * n + a];
        if (v < nn_cost[c] || (v == nn_cost[c] && a < nn[c])) {
          nn[c] = a;
          nn_cost[c] = v;
        }
      }
    }
  }

  auto root = [&](std::size_t i) {
    while (parent[i] != i) i = parent[i];
    return i;
  };
  std::vector<std::size_t> raw(n);
  for (std::size_t i = 0; i < n; ++i) raw[i] = root(i);

  Clustering result;
  result.method = ClusterMethod::kWard;
  result.k = k;
  result.assignments = canonical_labels(raw);
  result.centroids = member_means(points, result.assignments, k);
  result.inertia = partition_inertia(points, result.assignments, k);
  result.iterations = n - k;
  return result;
}

}  // namespace gdoe
