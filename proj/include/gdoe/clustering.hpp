#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "gdoe/geometry_types.hpp"

namespace gdoe {

enum class ClusterMethod { kKMeans, kWard };

std::string to_string(ClusterMethod method);
ClusterMethod cluster_method_from_string(const std::string& text);

struct Clustering {
  ClusterMethod method = ClusterMethod::kKMeans;
  std::size_t k = 0;
  std::vector<std::size_t> assignments;  // per point
  std::vector<Point2> centroids;         // member means
  double inertia = 0.0;                  // total within-cluster squared distance
  std::vector<double> inertia_history;   // kmeans: after each Lloyd iteration
  std::size_t iterations = 0;
};

nlohmann::json to_json(const Clustering& clustering);

/// k-means++ seeding then Lloyd iterations to an assignment fixpoint (or
/// max_iter). Empty clusters take the point farthest from its centroid in
/// the largest cluster.
Clustering kmeans(std::span<const Point2> points, std::size_t k, std::uint64_t seed,
                  std::size_t max_iter = 300);

/// Agglomerative Ward clustering via Lance-Williams updates of the merge
/// cost (increase in within-cluster sum of squares), stopped at k clusters.
/// Ties go to the lowest (i, j) pair of cluster indices.
Clustering ward(std::span<const Point2> points, std::size_t k);

/// Within-cluster sum of squares of an assignment (centroids recomputed).
double partition_inertia(std::span<const Point2> points, std::span<const std::size_t> assignments,
                         std::size_t k);

/// Relabels an assignment so cluster ids appear in order of first member;
/// two partitions are equal iff their canonical forms are equal.
std::vector<std::size_t> canonical_labels(std::span<const std::size_t> assignments);

}  // namespace gdoe
