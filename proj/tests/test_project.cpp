#include <doctest.h>

#include <filesystem>
#include <random>

#include "gdoe/error.hpp"
#include "gdoe/project.hpp"

using namespace gdoe;

namespace {

vae::TrainingConfig quick(std::uint64_t seed) {
  vae::TrainingConfig cfg;
  cfg.seed = seed;
  cfg.epochs = 20;
  cfg.train_dup = 10;
  cfg.test_dup = 5;
  cfg.batch_size = 32;
  return cfg;
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

Project trained_two_level() {
  auto p = make_project("2x4");
  build_initial_design(p, std::nullopt);
  train_model(p, quick(3));
  return p;
}

}  // namespace

TEST_CASE("workflow order is enforced") {
  auto p = make_project("2x4");
  CHECK(code_of([&] { p.require_initial_design(); }) == ErrorCode::kNotFound);
  CHECK(code_of([&] { train_model(p, quick(1)); }) == ErrorCode::kNotFound);
  const auto counts = build_initial_design(p, std::nullopt);
  CHECK(counts.full == 16);
  CHECK(counts.filtered == 16);
  CHECK(code_of([&] { p.require_model(); }) == ErrorCode::kNotFound);
  CHECK(code_of([&] { p.design("nope"); }) == ErrorCode::kNotFound);

  auto cnn = make_project("cnn");
  const auto c = build_initial_design(cnn, std::nullopt);
  CHECK(c.full == 7200);
  CHECK(c.filtered == 1920);
  CHECK(build_initial_design(cnn, std::vector<std::string>{}).filtered == 7200);
  CHECK(code_of([] { make_project("mnist"); }) == ErrorCode::kValidation);
}

TEST_CASE("project json round trip is exact") {
  auto p = trained_two_level();
  p.grids["sq"] = GridSpec::square(3, 3);
  generate_gdoe(p, "sq", "g1", true);
  sample_random(p, 8, 5, "r8");
  const auto& g1 = p.gdoes.at("g1").design;
  std::vector<ResponseRecord> records;
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(10, 1);
  for (auto id : g1.trial_ids) {
    const double reps[] = {n(rng), n(rng), n(rng)};
    records.push_back(compute_lcl(reps, 0.9, id));
  }
  set_responses(p, "g1", records);

  const auto text = to_json(p).dump();
  const auto back = project_from_json(nlohmann::json::parse(text));
  CHECK(to_json(back).dump() == text);

  const auto enc = encode_design(p.require_initial_design());
  CHECK(back.require_model().encode_mean(enc.rows) == p.require_model().encode_mean(enc.rows));
  const Point2 pt[] = {{0.37, 0.61}};
  CHECK(vae::decode_points(back.require_model(), pt, LatentSpace::kUniformed) ==
        vae::decode_points(p.require_model(), pt, LatentSpace::kUniformed));
  CHECK(back.gdoes.at("g1").design.trials == g1.trials);
  CHECK(back.gdoes.at("g1").diagnostics.n_trials == p.gdoes.at("g1").diagnostics.n_trials);
  CHECK(back.responses.at("g1").size() == g1.size());
  CHECK(back.history.size() == 20);

  const auto path = std::filesystem::temp_directory_path() / "gdoe_project_roundtrip.json";
  save_project(p, path);
  CHECK(to_json(load_project(path)).dump() == text);
  std::filesystem::remove(path);
  CHECK(code_of([&] { load_project(path); }) == ErrorCode::kIo);
}

TEST_CASE("schema version checks") {
  auto j = to_json(make_project("2x4"));
  j["schema_version"] = kSchemaVersion + 1;
  CHECK(code_of([&] { project_from_json(j); }) == ErrorCode::kValidation);
  j.erase("schema_version");
  CHECK(code_of([&] { project_from_json(j); }) == ErrorCode::kValidation);
}

TEST_CASE("responses must reference trials of the design") {
  auto p = trained_two_level();
  const double reps[] = {1.0, 2.0};
  CHECK(code_of([&] { set_responses(p, "initial", {compute_lcl(reps, 0.9, 99)}); }) == ErrorCode::kValidation);
  CHECK(code_of([&] {
          set_responses(p, "initial", {compute_lcl(reps, 0.9, 1), compute_lcl(reps, 0.9, 1)});
        }) == ErrorCode::kValidation);
  CHECK(code_of([&] { set_responses(p, "missing", {compute_lcl(reps, 0.9, 1)}); }) == ErrorCode::kNotFound);
}

TEST_CASE("response surface report") {
  auto p = trained_two_level();
  const auto& d = p.require_initial_design();
  std::vector<ResponseRecord> records;
  for (std::size_t r = 0; r < d.size(); ++r) {
    const double base = std::get<double>(d.trials[r][0]) * 2 + std::get<double>(d.trials[r][1]);
    const double reps[] = {base - 0.1, base, base + 0.1};
    records.push_back(compute_lcl(reps, 0.9, d.trial_ids[r]));
  }
  set_responses(p, kInitialDesign, records);
  const auto report = response_surface(p, kInitialDesign, 50, Goal::kMax, Metric::kMean, true);
  CHECK(report.best_value == doctest::Approx(3.0));
  CHECK(std::get<double>(report.best_trial[0]) == 1.0);
  CHECK(std::get<double>(report.best_trial[1]) == 1.0);
  CHECK(report.optimum.value <= 3.0 + 1e-12);
  CHECK(report.surface.map.width == 50);
  CHECK(report.optimum_trial.size() == 4);
  const auto j = to_json(report, false);
  CHECK(j.contains("interpolated"));
  CHECK(j.contains("executed"));
  CHECK_FALSE(j.contains("surface"));

  std::ostringstream csv;
  write_report_csv(csv, report);
  CHECK(csv.str().find("executed") != std::string::npos);
  CHECK(csv.str().find("interpolated") != std::string::npos);
}

TEST_CASE("cluster centroids become a grid") {
  auto p = trained_two_level();
  const auto c = cluster_initial(p, ClusterMethod::kWard, 4, 0, "w4");
  CHECK(c.centroids.size() == 4);
  REQUIRE(p.grids.count("w4") == 1);
  CHECK(p.grids.at("w4").type == GridType::kExplicit);
  const auto& g = generate_gdoe(p, "w4", "w4d", true);
  CHECK(g.diagnostics.n_trials == 4);
  CHECK(g.design.provenance == Provenance::kGeneratedCluster);
}

TEST_CASE("rebuilding the design drops derived artifacts") {
  auto p = trained_two_level();
  sample_random(p, 4, 1, "r4");
  build_initial_design(p, std::nullopt);
  CHECK_FALSE(p.model.has_value());
  CHECK(p.gdoes.empty());
  CHECK(p.responses.empty());
}
