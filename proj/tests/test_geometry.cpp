#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "gdoe/error.hpp"
#include "gdoe/geometry.hpp"

using namespace gdoe;

namespace {

double riemann(const FieldMap& map) {
  double s = 0;
  for (double v : map.values) s += v;
  return s / (map.width * map.height);
}

bool same_set(std::vector<Point2> a, std::vector<Point2> b, double tol) {
  if (a.size() != b.size()) return false;
  for (const auto& p : a) {
    auto it = std::find_if(b.begin(), b.end(), [&](const Point2& q) {
      return std::abs(p.x - q.x) < tol && std::abs(p.y - q.y) < tol;
    });
    if (it == b.end()) return false;
    b.erase(it);
  }
  return true;
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected gdoe::Error");
  return ErrorCode::kValidation;
}

}  // namespace

TEST_CASE("grid counts") {
  CHECK(make_grid(GridSpec::polar(2, 3)).size() == 7);
  CHECK(make_grid(GridSpec::polar(0, 3)).size() == 1);
  CHECK(make_grid(GridSpec::polar(5, 8)).size() == 41);
  CHECK(make_grid(GridSpec::polar(5, 8, 0.0, false)).size() == 40);
  CHECK(make_grid(GridSpec::double_square(0.6, 1.4, 0.0)).size() == 8);
  for (int nx = 1; nx <= 6; ++nx)
    for (int ny = 1; ny <= 6; ++ny) {
      const auto spec = GridSpec::square(nx, ny);
      CHECK(make_grid(spec).size() == std::size_t(nx * ny));
      CHECK(spec.point_count() == std::size_t(nx * ny));
    }
}

TEST_CASE("square grid at cell centers") {
  const auto pts = make_grid(GridSpec::square(3, 3));
  REQUIRE(pts.size() == 9);
  CHECK(pts[0].x == doctest::Approx(1.0 / 6));
  CHECK(pts[0].y == doctest::Approx(1.0 / 6));
  std::vector<Point2> expected;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) expected.push_back({(i + 0.5) / 3, (j + 0.5) / 3});
  CHECK(same_set(pts, expected, 1e-15));
  for (const auto& p : make_grid_uniformed(GridSpec::polar(5, 8))) {
    CHECK(p.x > 0);
    CHECK(p.x < 1);
    CHECK(p.y > 0);
    CHECK(p.y < 1);
  }
}

TEST_CASE("square rotation by a quarter turn permutes points") {
  for (int n : {2, 3, 4, 7}) {
    const auto a = make_grid(GridSpec::square(n, n));
    const auto b = make_grid(GridSpec::square(n, n, std::numbers::pi / 2));
    CHECK(same_set(a, b, 1e-12));
  }
  // A small rotation stays inside; a large one on a fine grid pushes corners out.
  CHECK(make_grid(GridSpec::square(3, 3, std::numbers::pi / 8)).size() == 9);
  CHECK(code_of([] { make_grid(GridSpec::square(10, 10, std::numbers::pi / 4)); }) ==
        ErrorCode::kDomain);
}

TEST_CASE("polar ring radii partition the normal mass") {
  for (int rings : {1, 2, 5}) {
    double prev = 0;
    for (int k = 1; k <= rings; ++k) {
      const double r = polar_ring_radius(k, rings);
      CHECK(r > prev);
      // Simpson integration of the Rayleigh density between consecutive radii.
      const int n = 2000;
      const double h = (r - prev) / n;
      double s = 0;
      for (int i = 0; i <= n; ++i) {
        const double t = prev + i * h;
        const double f = t * std::exp(-0.5 * t * t);
        s += f * (i == 0 || i == n ? 1 : (i % 2 ? 4 : 2));
      }
      CHECK(s * h / 3 == doctest::Approx(1.0 / (rings + 1)).epsilon(1e-9));
      prev = r;
    }
    CHECK(std::exp(-0.5 * prev * prev) == doctest::Approx(1.0 / (rings + 1)).epsilon(1e-12));
  }
}

TEST_CASE("polar layout") {
  const auto pts = make_grid(GridSpec::polar(2, 3));
  CHECK(pts[0] == Point2{0, 0});
  for (std::size_t i = 1; i < pts.size(); ++i) {
    const double r = std::hypot(pts[i].x, pts[i].y);
    const int ring = int((i - 1) / 3) + 1;
    CHECK(r == doctest::Approx(polar_ring_radius(ring, 2)));
  }
  const double a1 = std::atan2(pts[1].y, pts[1].x), a2 = std::atan2(pts[2].y, pts[2].x);
  CHECK(std::remainder(a2 - a1, 2 * std::numbers::pi) == doctest::Approx(2 * std::numbers::pi / 3));
}

TEST_CASE("double square layout") {
  const auto pts = make_grid(GridSpec::double_square(0.5, 1.2, 0.3));
  REQUIRE(pts.size() == 8);
  std::vector<double> inner, outer;
  for (const auto& p : pts) {
    const double r = std::hypot(p.x, p.y);
    (std::abs(r - 0.5) < 1e-12 ? inner : outer).push_back(std::atan2(p.y, p.x));
    if (std::abs(r - 0.5) >= 1e-12) CHECK(r == doctest::Approx(1.2));
  }
  REQUIRE(inner.size() == 4);
  REQUIRE(outer.size() == 4);
  for (double a : inner) {
    double best = 10;
    for (double b : outer) best = std::min(best, std::abs(std::remainder(a - b, 2 * std::numbers::pi)));
    CHECK(best == doctest::Approx(std::numbers::pi / 4));
  }
  CHECK(code_of([] { make_grid(GridSpec::double_square(-1, 1, 0)); }) == ErrorCode::kValidation);
  CHECK(code_of([] { make_grid(GridSpec::square(0, 3)); }) == ErrorCode::kValidation);
}

TEST_CASE("grid spec json round trip") {
  for (const auto& spec : {GridSpec::square(4, 5, 0.1), GridSpec::polar(3, 6, 0.2, false),
                           GridSpec::double_square(0.4, 0.9, 0.39),
                           GridSpec::explicit_points({{0.2, 0.3}, {0.7, 0.1}}, LatentSpace::kUniformed)}) {
    const auto back = grid_spec_from_json(nlohmann::json::parse(to_json(spec).dump()));
    CHECK(make_grid(back) == make_grid(spec));
    CHECK(back.space == spec.space);
  }
}

TEST_CASE("density map") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<Point2> pts(10000);
  for (auto& p : pts) p = {u(rng), u(rng)};
  const auto map = density_map(pts, 20, 20);
  const auto [lo, hi] = std::minmax_element(map.values.begin(), map.values.end());
  CHECK(*lo > 0);
  CHECK(*hi / *lo < 2);
  CHECK(riemann(map) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(density_map(pts, 20, 20).values == map.values);

  const Point2 one[] = {{0.31, 0.77}};
  const auto single = density_map(one, 50, 50);
  const auto peak = std::max_element(single.values.begin(), single.values.end()) - single.values.begin();
  CHECK(peak % 50 == 15);
  CHECK(peak / 50 == 38);
  CHECK(riemann(single) == doctest::Approx(1.0).epsilon(1e-6));

  std::vector<Point2> clustered;
  std::normal_distribution<double> n(0.3, 0.05);
  for (int i = 0; i < 300; ++i) clustered.push_back({std::clamp(n(rng), 0.01, 0.99), std::clamp(n(rng), 0.01, 0.99)});
  const auto c = density_map(clustered, 64, 48);
  CHECK(c.width == 64);
  CHECK(c.height == 48);
  CHECK(*std::min_element(c.values.begin(), c.values.end()) >= 0);
  CHECK(riemann(c) == doctest::Approx(1.0).epsilon(1e-6));

  CHECK(code_of([] { density_map({}, 10, 10); }) == ErrorCode::kValidation);
}

TEST_CASE("gradient map on synthetic fields") {
  const LevelField constant = [](std::span<const Point2> p) {
    return Eigen::MatrixXd::Constant(Eigen::Index(p.size()), 3, 0.4);
  };
  const auto zero = gradient_map(constant, 10, 10, Aggregation::kSum);
  for (double v : zero.values) CHECK(v == 0.0);

  const LevelField identity = [](std::span<const Point2> p) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Constant(Eigen::Index(p.size()), 3, 0.2);
    for (std::size_t r = 0; r < p.size(); ++r) m(Eigen::Index(r), 0) = p[r].x;
    return m;
  };
  const auto sum = gradient_map(identity, 12, 9, Aggregation::kSum);
  for (double v : sum.values) CHECK(v == doctest::Approx(1.0).epsilon(1e-9));

  const LevelField mixed = [](std::span<const Point2> p) {
    Eigen::MatrixXd m(Eigen::Index(p.size()), 2);
    for (std::size_t r = 0; r < p.size(); ++r) {
      m(Eigen::Index(r), 0) = p[r].x * p[r].y;
      m(Eigen::Index(r), 1) = std::sin(3 * p[r].x) * 0.5 + 0.5;
    }
    return m;
  };
  const auto s = gradient_map(mixed, 15, 15, Aggregation::kSum);
  const auto mx = gradient_map(mixed, 15, 15, Aggregation::kMax);
  for (std::size_t i = 0; i < s.values.size(); ++i) CHECK(mx.values[i] <= s.values[i]);
  // Interior cell: hand-computed central differences.
  const Point2 c = s.center(7, 4);
  const double dx = 1.0 / 15;
  const double expect = std::abs(c.y) + std::abs(c.x) +
                        std::abs((std::sin(3 * (c.x + dx)) - std::sin(3 * (c.x - dx))) * 0.5 / (2 * dx));
  CHECK(s.at(7, 4) == doctest::Approx(expect).epsilon(1e-9));

  CHECK(code_of([&] { gradient_map(identity, 2, 10, Aggregation::kSum); }) == ErrorCode::kValidation);
}

TEST_CASE("borders and segments") {
  FieldMap map;
  map.width = 6;
  map.height = 4;
  map.values.assign(24, 0.1);
  for (int j = 0; j < 4; ++j) map.at(3, j) = 0.9;
  CHECK(extract_borders(map, 0.0).size() == 24);
  CHECK(extract_borders(map, 1.0).empty());
  const auto borders = extract_borders(map, 0.5);
  REQUIRE(borders.size() == 4);
  CHECK(borders[0].i == 3);
  CHECK(borders[0].j == 0);
  CHECK(borders[0].point.x == doctest::Approx(3.5 / 6));
  CHECK(count_segments(map, 0.5) == 2);
  map.at(3, 2) = 0.2;
  CHECK(count_segments(map, 0.5) == 1);
  CHECK(count_segments(map, 0.0) == 0);
}

TEST_CASE("field map json and csv") {
  FieldMap map;
  map.name = "density";
  map.width = 3;
  map.height = 2;
  map.values = {1, 2, 3, 4, 5, 6};
  const auto j = to_json(map);
  CHECK(j["values"].size() == 2);
  CHECK(j["values"][1][0] == 4.0);
  std::ostringstream out;
  write_field_csv(out, map);
  const std::string csv = out.str();
  CHECK(csv.rfind("x,y,value\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 7);
}
