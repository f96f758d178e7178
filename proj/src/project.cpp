#include "gdoe/project.hpp"

#include <fstream>
#include <ostream>
#include <sstream>

#include "csv.hpp"
#include "gdoe/error.hpp"
#include "gdoe/json_io.hpp"
#include "gdoe/presets.hpp"

namespace gdoe {

using nlohmann::json;

namespace {

json points_json(const std::vector<Point2>& points) {
  json out = json::array();
  for (const auto& p : points) out.push_back(to_json(p));
  return out;
}

std::vector<Point2> points_from_json(const json& j) {
  std::vector<Point2> out;
  for (const auto& p : j) out.push_back(point_from_json(p));
  return out;
}

}  // namespace

std::vector<ConstraintExpr> Project::parsed_constraints() const {
  return parse_constraints(constraints, factors);
}

const Design& Project::require_initial_design() const {
  if (!initial_design) {
    throw Error(ErrorCode::kNotFound, "no initial design; run `gdoe design build` first");
  }
  return *initial_design;
}

const vae::VaeModel& Project::require_model() const {
  if (!model) throw Error(ErrorCode::kNotFound, "no trained model; run `gdoe train` first");
  return *model;
}

const Design& Project::design(const std::string& name) const {
  if (name == kInitialDesign) return require_initial_design();
  const auto it = gdoes.find(name);
  if (it == gdoes.end()) throw Error(ErrorCode::kNotFound, "no design named '" + name + "'");
  return it->second.design;
}

json to_json(const Project& p) {
  json factors = json::array();
  for (const auto& f : p.factors) factors.push_back(to_json(f));
  json history = json::array();
  for (const auto& r : p.history) history.push_back(vae::to_json(r));
  json grids = json::object();
  for (const auto& [name, spec] : p.grids) grids[name] = to_json(spec);
  json gdoes = json::object();
  for (const auto& [name, g] : p.gdoes) {
    gdoes[name] = {{"grid", g.grid},
                   {"model_generation", g.model_generation},
                   {"snap", g.snap},
                   {"design", to_json(g.design)},
                   {"uniformed", points_json(g.uniformed)},
                   {"diagnostics", to_json(g.diagnostics)}};
  }
  json responses = json::object();
  for (const auto& [name, records] : p.responses) {
    json list = json::array();
    for (const auto& r : records) list.push_back(to_json(r));
    responses[name] = std::move(list);
  }
  return {{"schema_version", p.schema_version},
          {"factors", factors},
          {"constraints", p.constraints},
          {"initial_design", p.initial_design ? to_json(*p.initial_design) : json(nullptr)},
          {"full_factorial_size", p.full_factorial_size},
          {"model", p.model ? vae::to_json(*p.model) : json(nullptr)},
          {"model_generation", p.model_generation},
          {"history", history},
          {"grids", grids},
          {"cluster_grids", p.cluster_grids},
          {"gdoes", gdoes},
          {"responses", responses},
          {"seeds", p.seeds}};
}

Project project_from_json(const json& j) {
  if (!j.is_object() || !j.contains("schema_version")) {
    throw Error(ErrorCode::kValidation, "not a project file: schema_version missing");
  }
  const int version = j.at("schema_version").get<int>();
  if (version > kSchemaVersion) {
    throw Error(ErrorCode::kValidation, "project schema version " + std::to_string(version) +
                                            " is newer than supported version " +
                                            std::to_string(kSchemaVersion));
  }
  if (version < 1) throw Error(ErrorCode::kValidation, "invalid schema version");
  Project p;
  p.schema_version = kSchemaVersion;
  for (const auto& f : j.at("factors")) p.factors.push_back(factor_from_json(f));
  validate_factors(p.factors);
  p.constraints = j.value("constraints", std::vector<std::string>{});
  (void)p.parsed_constraints();
  if (j.contains("initial_design") && !j.at("initial_design").is_null()) {
    p.initial_design = design_from_json(j.at("initial_design"));
  }
  p.full_factorial_size = j.value("full_factorial_size", std::size_t{0});
  if (j.contains("model") && !j.at("model").is_null()) {
    p.model = vae::vae_model_from_json(j.at("model"));
  }
  p.model_generation = j.value("model_generation", std::size_t{0});
  const json empty_array = json::array();
  const json empty_object = json::object();
  auto member = [&](const char* key, const json& fallback) -> const json& {
    return j.contains(key) ? j.at(key) : fallback;
  };
  for (const auto& r : member("history", empty_array)) {
    p.history.push_back(vae::epoch_record_from_json(r));
  }
  for (const auto& [name, spec] : member("grids", empty_object).items()) {
    p.grids[name] = grid_spec_from_json(spec);
  }
  for (const auto& name : member("cluster_grids", empty_array)) {
    const auto n = name.get<std::string>();
    if (p.grids.count(n)) p.cluster_grids.insert(n);
  }
  const auto constraints = p.parsed_constraints();
  for (const auto& [name, g] : member("gdoes", empty_object).items()) {
    SavedGdoe saved;
    saved.grid = g.at("grid").get<std::string>();
    saved.model_generation = g.at("model_generation").get<std::size_t>();
    saved.snap = g.value("snap", false);
    saved.design = design_from_json(g.at("design"));
    saved.uniformed = points_from_json(g.at("uniformed"));
    saved.diagnostics = diagnose(saved.design, constraints, saved.uniformed);
    const json& diag = g.at("diagnostics");
    for (const auto& c : diag.contains("duplicates") ? diag.at("duplicates") : empty_array) {
      saved.diagnostics.duplicates.push_back(
          {c.at("dropped_id").get<std::int64_t>(), c.at("kept_id").get<std::int64_t>()});
    }
    saved.diagnostics.n_trials = diag.value("n_trials", saved.diagnostics.n_trials);
    p.gdoes[name] = std::move(saved);
  }
  for (const auto& [name, list] : member("responses", empty_object).items()) {
    auto& records = p.responses[name];
    for (const auto& r : list) records.push_back(response_record_from_json(r));
  }
  p.seeds = j.value("seeds", json::object());
  return p;
}

Project load_project(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open project file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kValidation, "project file " + path.string() + ": " + e.what());
  }
  return project_from_json(j);
}

void save_project(const Project& project, const std::filesystem::path& path) {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp);
    if (!out) throw Error(ErrorCode::kIo, "cannot write " + tmp.string());
    out << to_json(project).dump(1) << '\n';
    if (!out) throw Error(ErrorCode::kIo, "write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Project make_project(const std::string& preset) {
  Project p;
  if (preset == "cnn") {
    p.factors = presets::cnn_factors();
    p.constraints = presets::cnn_constraints();
  } else if (preset == "2x4") {
    p.factors = presets::two_level_factors(4);
  } else if (preset != "empty") {
    throw Error(ErrorCode::kValidation, "unknown preset '" + preset + "' (cnn, 2x4, empty)");
  }
  return p;
}

BuildCounts build_initial_design(Project& project,
                                 const std::optional<std::vector<std::string>>& constraints) {
  if (project.factors.empty()) throw Error(ErrorCode::kValidation, "the project has no factors");
  validate_factors(project.factors);
  std::vector<std::string> texts = constraints ? *constraints : project.constraints;
  const auto parsed = parse_constraints(texts, project.factors);
  Design full = build_full_factorial(project.factors);
  Design filtered = filter_by_constraints(full, parsed);
  if (filtered.empty()) throw Error(ErrorCode::kValidation, "the constraints exclude every trial");
  project.constraints = std::move(texts);
  project.full_factorial_size = full.size();
  project.initial_design = std::move(filtered);
  project.model.reset();
  project.history.clear();
  project.gdoes.clear();
  project.responses.clear();
  return {full.size(), project.initial_design->size()};
}

void train_model(Project& project, const vae::TrainingConfig& config,
                 const vae::EpochCallback& on_epoch) {
  const Design& design = project.require_initial_design();
  auto result = vae::train(encode_design(design), config, on_epoch);
  project.model = std::move(result.model);
  project.history = std::move(result.history);
  ++project.model_generation;
  project.seeds["train"] = config.seed;
}

vae::LatentEmbedding initial_embedding(const Project& project) {
  const Design& design = project.require_initial_design();
  return vae::embed(project.require_model(), encode_design(design), design.trial_ids);
}

std::vector<Point2> design_points(const Project& project, const std::string& name) {
  if (name == kInitialDesign) return initial_embedding(project).uniformed;
  (void)project.design(name);
  return project.gdoes.at(name).uniformed;
}

GeneratedDesign preview_grid(const Project& project, const GridSpec& spec, bool snap) {
  spec.validate();
  return generate(project.require_model(), spec, project.parsed_constraints(), snap);
}

const SavedGdoe& generate_gdoe(Project& project, const std::string& grid_name,
                               const std::string& gdoe_name, bool snap) {
  if (gdoe_name.empty() || gdoe_name == kInitialDesign) {
    throw Error(ErrorCode::kValidation, "invalid design name '" + gdoe_name + "'");
  }
  const auto it = project.grids.find(grid_name);
  if (it == project.grids.end()) {
    throw Error(ErrorCode::kNotFound, "no saved grid named '" + grid_name + "'");
  }
  GeneratedDesign generated = preview_grid(project, it->second, snap);
  if (project.cluster_grids.count(grid_name)) generated.design.provenance = Provenance::kGeneratedCluster;
  SavedGdoe saved;
  saved.grid = grid_name;
  saved.model_generation = project.model_generation;
  saved.snap = snap;
  saved.design = std::move(generated.design);
  saved.uniformed = std::move(generated.uniformed);
  saved.diagnostics = std::move(generated.diagnostics);
  project.responses.erase(gdoe_name);
  return project.gdoes[gdoe_name] = std::move(saved);
}

Clustering cluster_initial(Project& project, ClusterMethod method, std::size_t k,
                           std::uint64_t seed, const std::string& grid_name) {
  const auto points = initial_embedding(project).uniformed;
  Clustering c = method == ClusterMethod::kKMeans ? kmeans(points, k, seed) : ward(points, k);
  if (!grid_name.empty()) {
    project.grids[grid_name] = GridSpec::explicit_points(c.centroids, LatentSpace::kUniformed);
    project.cluster_grids.insert(grid_name);
  }
  if (method == ClusterMethod::kKMeans) project.seeds["cluster"] = seed;
  return c;
}

const SavedGdoe& sample_random(Project& project, std::size_t n, std::uint64_t seed,
                               const std::string& gdoe_name) {
  if (gdoe_name.empty() || gdoe_name == kInitialDesign) {
    throw Error(ErrorCode::kValidation, "invalid design name '" + gdoe_name + "'");
  }
  const Design& initial = project.require_initial_design();
  const auto embedding = initial_embedding(project);
  SavedGdoe saved;
  saved.grid = "random";
  saved.model_generation = project.model_generation;
  saved.design = random_subset(initial, n, seed);
  for (const auto id : saved.design.trial_ids) {
    const auto pos = std::find(initial.trial_ids.begin(), initial.trial_ids.end(), id);
    saved.uniformed.push_back(embedding.uniformed[static_cast<std::size_t>(
        pos - initial.trial_ids.begin())]);
  }
  saved.diagnostics = diagnose(saved.design, project.parsed_constraints(), saved.uniformed);
  project.seeds["sample:" + gdoe_name] = seed;
  project.responses.erase(gdoe_name);
  return project.gdoes[gdoe_name] = std::move(saved);
}

void set_responses(Project& project, const std::string& design_name,
                   std::vector<ResponseRecord> records) {
  const Design& design = project.design(design_name);
  if (records.empty()) throw Error(ErrorCode::kValidation, "no response records");
  std::vector<std::int64_t> seen;
  for (const auto& r : records) {
    if (std::find(design.trial_ids.begin(), design.trial_ids.end(), r.trial_id) ==
        design.trial_ids.end()) {
      throw Error(ErrorCode::kValidation, "trial " + std::to_string(r.trial_id) +
                                              " is not part of design '" + design_name + "'");
    }
    if (std::find(seen.begin(), seen.end(), r.trial_id) != seen.end()) {
      throw Error(ErrorCode::kValidation, "duplicate responses for trial " +
                                              std::to_string(r.trial_id));
    }
    seen.push_back(r.trial_id);
  }
  project.responses[design_name] = std::move(records);
}

std::string to_string(Metric metric) { return metric == Metric::kLcl ? "lcl" : "mean"; }

Metric metric_from_string(const std::string& text) {
  if (text == "lcl") return Metric::kLcl;
  if (text == "mean") return Metric::kMean;
  throw Error(ErrorCode::kValidation, "metric must be lcl or mean, got '" + text + "'");
}

namespace {

struct ResponseTable {
  std::vector<std::size_t> rows;  // positions in the design
  std::vector<double> values;
};

ResponseTable response_table(const Project& project, const std::string& name, Metric metric) {
  const Design& design = project.design(name);
  const auto it = project.responses.find(name);
  if (it == project.responses.end()) {
    throw Error(ErrorCode::kNotFound, "no responses for design '" + name +
                                          "'; run `gdoe respond` first");
  }
  ResponseTable table;
  for (const auto& r : it->second) {
    const auto pos = std::find(design.trial_ids.begin(), design.trial_ids.end(), r.trial_id);
    table.rows.push_back(static_cast<std::size_t>(pos - design.trial_ids.begin()));
    table.values.push_back(metric == Metric::kLcl ? r.lcl : r.mean);
  }
  return table;
}

}  // namespace

json to_json(const SurfaceReport& r, bool include_map) {
  auto settings = [&](const Trial& trial) {
    json out = json::object();
    for (std::size_t f = 0; f < r.factor_names.size() && f < trial.size(); ++f) {
      out[r.factor_names[f]] = to_json(trial[f]);
    }
    return out;
  };
  json out = {{"design", r.design},
              {"metric", to_string(r.metric)},
              {"goal", to_string(r.goal)},
              {"interpolated",
               {{"lat1u", r.optimum.point.x},
                {"lat2u", r.optimum.point.y},
                {"cell", {r.optimum.i, r.optimum.j}},
                {"value", r.optimum.value},
                {"trial", settings(r.optimum_trial)}}},
              {"executed",
               {{"trial_id", r.best_trial_id},
                {"lat1u", r.best_point.x},
                {"lat2u", r.best_point.y},
                {"value", r.best_value},
                {"trial", settings(r.best_trial)}}}};
  out["nearest_only"] = r.surface.nearest_only;
  if (include_map) out["surface"] = to_json(r.surface);
  return out;
}

SurfaceReport response_surface(const Project& project, const std::string& design_name,
                               int resolution, Goal goal, Metric metric, bool snap) {
  const Design& design = project.design(design_name);
  const auto table = response_table(project, design_name, metric);
  const auto all_points = design_points(project, design_name);
  std::vector<Point2> points;
  for (const auto row : table.rows) points.push_back(all_points[row]);

  SurfaceReport report;
  report.design = design_name;
  report.metric = metric;
  report.goal = goal;
  for (const auto& f : design.factors) report.factor_names.push_back(f.name);
  try {
    report.surface = interpolate(points, table.values, resolution);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kTriangulation) throw;
    report.surface = interpolate_nearest(points, table.values, resolution);
  }
  report.optimum = find_optimum(report.surface, goal);
  const Point2 at[] = {report.optimum.point};
  report.optimum_trial =
      vae::decode_latent(project.require_model(), at, LatentSpace::kUniformed, snap).trials[0];
  const std::size_t best = best_index(table.values, goal);
  report.best_trial_id = design.trial_ids[table.rows[best]];
  report.best_trial = design.trials[table.rows[best]];
  report.best_point = points[best];
  report.best_value = table.values[best];
  return report;
}

void write_report_csv(std::ostream& out, const SurfaceReport& r) {
  out << "kind";
  for (const auto& name : r.factor_names) out << ',' << csv::escape(name);
  out << ",lat1u,lat2u," << to_string(r.metric) << '\n';
  auto row = [&](const char* kind, const Trial& trial, Point2 p, double value) {
    out << kind;
    for (const auto& level : trial) out << ',' << csv::escape(format_level(level));
    out << ',' << csv::format_double(p.x) << ',' << csv::format_double(p.y) << ','
        << csv::format_double(value) << '\n';
  };
  row("executed", r.best_trial, r.best_point, r.best_value);
  row("interpolated", r.optimum_trial, r.optimum.point, r.optimum.value);
}

ImportanceResult factor_importance(const Project& project, const std::string& design_name,
                                   Metric metric, const ImportanceConfig& config) {
  const Design& design = project.design(design_name);
  const auto table = response_table(project, design_name, metric);
  Design subset;
  subset.factors = design.factors;
  subset.provenance = design.provenance;
  for (const auto row : table.rows) {
    subset.trials.push_back(design.trials[row]);
    subset.trial_ids.push_back(design.trial_ids[row]);
  }
  return importance(subset, table.values, config);
}

FieldMap factor_map(const Project& project, const std::string& factor, int resolution) {
  const auto& model = project.require_model();
  const auto idx = find_factor(model.column_map.factors, factor);
  if (!idx) throw Error(ErrorCode::kNotFound, "no factor named '" + factor + "'");
  if (resolution < 1) throw Error(ErrorCode::kValidation, "resolution must be positive");
  FieldMap map;
  map.name = "factor:" + factor;
  map.width = resolution;
  map.height = resolution;
  const auto centers = map.centers();
  const Eigen::MatrixXd levels = model_level_field(model)(centers);
  map.values.resize(centers.size());
  for (std::size_t c = 0; c < centers.size(); ++c) {
    map.values[c] = levels(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(*idx));
  }
  return map;
}

FieldMap density_of_initial(const Project& project, int resolution) {
  const auto points = initial_embedding(project).uniformed;
  return density_map(points, resolution, resolution);
}

}  // namespace gdoe
