#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "gdoe/clustering.hpp"
#include "gdoe/error.hpp"

using namespace gdoe;

namespace {

std::vector<Point2> random_points(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.01, 0.99);
  std::vector<Point2> pts(n);
  for (auto& p : pts) p = {u(rng), u(rng)};
  return pts;
}

// Greedy minimum-variance agglomeration computed directly from member sets.
std::vector<std::size_t> reference_ward(std::span<const Point2> pts, std::size_t k) {
  std::vector<std::vector<std::size_t>> clusters;
  for (std::size_t i = 0; i < pts.size(); ++i) clusters.push_back({i});
  auto sse = [&](const std::vector<std::size_t>& members) {
    double mx = 0, my = 0;
    for (auto m : members) mx += pts[m].x, my += pts[m].y;
    mx /= members.size();
    my /= members.size();
    double s = 0;
    for (auto m : members) s += (pts[m].x - mx) * (pts[m].x - mx) + (pts[m].y - my) * (pts[m].y - my);
    return s;
  };
  while (clusters.size() > k) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t bi = 0, bj = 0;
    for (std::size_t i = 0; i < clusters.size(); ++i)
      for (std::size_t j = i + 1; j < clusters.size(); ++j) {
        auto merged = clusters[i];
        merged.insert(merged.end(), clusters[j].begin(), clusters[j].end());
        const double cost = sse(merged) - sse(clusters[i]) - sse(clusters[j]);
        if (cost < best) best = cost, bi = i, bj = j;
      }
    clusters[bi].insert(clusters[bi].end(), clusters[bj].begin(), clusters[bj].end());
    clusters.erase(clusters.begin() + std::ptrdiff_t(bj));
  }
  std::vector<std::size_t> labels(pts.size());
  for (std::size_t c = 0; c < clusters.size(); ++c)
    for (auto m : clusters[c]) labels[m] = c;
  return canonical_labels(labels);
}

double brute_force_min_inertia(std::span<const Point2> pts, std::size_t k) {
  const std::size_t n = pts.size();
  std::vector<std::size_t> labels(n, 0);
  double best = std::numeric_limits<double>::infinity();
  while (true) {
    std::vector<bool> used(k, false);
    for (auto l : labels) used[l] = true;
    if (std::all_of(used.begin(), used.end(), [](bool b) { return b; }))
      best = std::min(best, partition_inertia(pts, labels, k));
    std::size_t i = 0;
    while (i < n && ++labels[i] == k) labels[i++] = 0;
    if (i == n) break;
  }
  return best;
}

void check_centroids(std::span<const Point2> pts, const Clustering& c) {
  std::vector<Point2> sum(c.k);
  std::vector<double> count(c.k, 0);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    sum[c.assignments[i]].x += pts[i].x;
    sum[c.assignments[i]].y += pts[i].y;
    ++count[c.assignments[i]];
  }
  for (std::size_t j = 0; j < c.k; ++j) {
    REQUIRE(count[j] > 0);
    CHECK(c.centroids[j].x == doctest::Approx(sum[j].x / count[j]));
    CHECK(c.centroids[j].y == doctest::Approx(sum[j].y / count[j]));
    CHECK(c.centroids[j].x > 0);
    CHECK(c.centroids[j].x < 1);
  }
  CHECK(c.inertia == doctest::Approx(partition_inertia(pts, c.assignments, c.k)));
}

}  // namespace

TEST_CASE("kmeans trivial cases") {
  std::mt19937_64 rng(1);
  const auto pts = random_points(30, rng);
  const auto one = kmeans(pts, 1, 4);
  double mx = 0, my = 0;
  for (const auto& p : pts) mx += p.x, my += p.y;
  CHECK(one.centroids[0].x == doctest::Approx(mx / 30));
  CHECK(one.centroids[0].y == doctest::Approx(my / 30));

  const auto all = kmeans(pts, 30, 4);
  CHECK(all.inertia == doctest::Approx(0.0).epsilon(1e-15).scale(1));
  CHECK(canonical_labels(all.assignments).back() == 29);

  CHECK_THROWS_AS(kmeans(pts, 31, 4), Error);
  std::vector<Point2> dup(5, Point2{0.5, 0.5});
  CHECK_THROWS_AS(kmeans(dup, 2, 1), Error);
  CHECK_THROWS_AS(kmeans(pts, 0, 1), Error);
}

TEST_CASE("kmeans on two separated pairs") {
  const std::vector<Point2> pts{{0.1, 0.1}, {0.12, 0.1}, {0.9, 0.88}, {0.9, 0.9}};
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto c = kmeans(pts, 2, seed);
    CHECK(c.inertia == doctest::Approx(brute_force_min_inertia(pts, 2)));
    CHECK(canonical_labels(c.assignments) == std::vector<std::size_t>{0, 0, 1, 1});
    check_centroids(pts, c);
  }
}

TEST_CASE("kmeans inertia is non-increasing and deterministic") {
  std::mt19937_64 rng(8);
  for (int rep = 0; rep < 10; ++rep) {
    const auto pts = random_points(200, rng);
    const auto c = kmeans(pts, 6, rep);
    for (std::size_t i = 1; i < c.inertia_history.size(); ++i)
      CHECK(c.inertia_history[i] <= c.inertia_history[i - 1] + 1e-12);
    check_centroids(pts, c);
    const auto again = kmeans(pts, 6, rep);
    CHECK(again.assignments == c.assignments);
  }
}

TEST_CASE("kmeans reaches a fixpoint and its restarts reach the optimum") {
  std::mt19937_64 rng(21);
  for (int rep = 0; rep < 20; ++rep) {
    const auto pts = random_points(7, rng);
    const double optimum = brute_force_min_inertia(pts, 2);
    double best = std::numeric_limits<double>::infinity();
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto c = kmeans(pts, 2, seed);
      CHECK(c.inertia >= optimum - 1e-12);
      best = std::min(best, c.inertia);
      // Every point is nearest to its own centroid.
      for (std::size_t i = 0; i < pts.size(); ++i) {
        const auto d = [&](const Point2& q) { return std::hypot(pts[i].x - q.x, pts[i].y - q.y); };
        CHECK(d(c.centroids[c.assignments[i]]) <= d(c.centroids[1 - c.assignments[i]]));
      }
    }
    CHECK(best == doctest::Approx(optimum));
  }
}

TEST_CASE("ward examples") {
  const std::vector<Point2> line{{0, 0.5}, {1, 0.5}, {10, 0.5}, {11, 0.5}};
  const auto two = ward(line, 2);
  CHECK(canonical_labels(two.assignments) == std::vector<std::size_t>{0, 0, 1, 1});
  CHECK(two.inertia == doctest::Approx(brute_force_min_inertia(line, 2)));

  CHECK(ward(line, 1).assignments == std::vector<std::size_t>(4, 0));
  CHECK(canonical_labels(ward(line, 4).assignments) == std::vector<std::size_t>{0, 1, 2, 3});
  CHECK_THROWS_AS(ward(line, 5), Error);
}

TEST_CASE("ward matches a reference agglomeration") {
  std::mt19937_64 rng(33);
  for (int rep = 0; rep < 40; ++rep) {
    const std::size_t n = 2 + rng() % 7;
    const auto pts = random_points(n, rng);
    for (std::size_t k = 1; k <= n; ++k) {
      const auto c = ward(pts, k);
      CHECK(canonical_labels(c.assignments) == reference_ward(pts, k));
      check_centroids(pts, c);
      CHECK(c.iterations == n - k);
    }
  }
}

TEST_CASE("ward partition is invariant to point order") {
  std::mt19937_64 rng(4);
  const auto pts = random_points(60, rng);
  const auto base = ward(pts, 5);
  std::vector<std::size_t> perm(pts.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<Point2> shuffled;
  for (auto p : perm) shuffled.push_back(pts[p]);
  const auto other = ward(shuffled, 5);
  std::vector<std::size_t> back(pts.size());
  for (std::size_t i = 0; i < perm.size(); ++i) back[perm[i]] = other.assignments[i];
  CHECK(canonical_labels(back) == canonical_labels(base.assignments));
  CHECK(other.inertia == doctest::Approx(base.inertia));
}

TEST_CASE("canonical labels") {
  const std::vector<std::size_t> a{2, 2, 0, 1, 0};
  CHECK(canonical_labels(a) == std::vector<std::size_t>{0, 0, 1, 2, 1});
  CHECK(cluster_method_from_string("ward") == ClusterMethod::kWard);
  CHECK(to_string(ClusterMethod::kKMeans) == "kmeans");
  CHECK_THROWS_AS(cluster_method_from_string("dbscan"), Error);
}
