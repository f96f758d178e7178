#pragma once

// The project file and the workflow operations shared by the CLI and the
// HTTP service.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "gdoe/clustering.hpp"
#include "gdoe/constraint.hpp"
#include "gdoe/design.hpp"
#include "gdoe/generator.hpp"
#include "gdoe/geometry.hpp"
#include "gdoe/response.hpp"
#include "gdoe/vae.hpp"

namespace gdoe {

inline constexpr int kSchemaVersion = 1;

/// Name under which the initial (constrained) design is addressed.
inline constexpr const char* kInitialDesign = "initial";

struct SavedGdoe {
  std::string grid;  // saved grid, or "random" for random subsets
  std::size_t model_generation = 0;
  bool snap = false;
  Design design;
  std::vector<Point2> uniformed;  // per trial
  DesignDiagnostics diagnostics;
};

struct Project {
  int schema_version = kSchemaVersion;
  std::vector<FactorSpec> factors;
  std::vector<std::string> constraints;
  std::optional<Design> initial_design;
  std::size_t full_factorial_size = 0;

  std::optional<vae::VaeModel> model;
  std::size_t model_generation = 0;  // bumped by every training run
  std::vector<vae::EpochRecord> history;

  std::map<std::string, GridSpec> grids;
  std::set<std::string> cluster_grids;  // grids holding cluster centroids
  std::map<std::string, SavedGdoe> gdoes;
  std::map<std::string, std::vector<ResponseRecord>> responses;  // by design name
  nlohmann::json seeds = nlohmann::json::object();                // seeds used, by step

  std::vector<ConstraintExpr> parsed_constraints() const;

  const Design& require_initial_design() const;
  const vae::VaeModel& require_model() const;

  /// The initial design or a saved G-DOE.
  const Design& design(const std::string& name) const;
};

nlohmann::json to_json(const Project& project);
/// Throws Error(kValidation) on a missing or newer schema version.
Project project_from_json(const nlohmann::json& j);

Project load_project(const std::filesystem::path& path);
/// Writes through a temporary file and rename.
void save_project(const Project& project, const std::filesystem::path& path);

/// Factor presets: "cnn" (the nine-factor CNN space with its two
/// constraints), "2x4" (F1..F4 at two levels), or "empty".
Project make_project(const std::string& preset);

struct BuildCounts {
  std::size_t full = 0;
  std::size_t filtered = 0;
};

/// Full factorial plus constraint filter. Replaces the constraint list when
/// `constraints` is given. Drops the model and everything derived from it.
BuildCounts build_initial_design(Project& project,
                                 const std::optional<std::vector<std::string>>& constraints);

/// Trains on the initial design and stores model, history, and seed.
void train_model(Project& project, const vae::TrainingConfig& config,
                 const vae::EpochCallback& on_epoch = {});

vae::LatentEmbedding initial_embedding(const Project& project);

/// Uniformed coordinates of each trial of a named design.
std::vector<Point2> design_points(const Project& project, const std::string& name);

GeneratedDesign preview_grid(const Project& project, const GridSpec& spec, bool snap);

/// Decodes a saved grid and stores the result as a G-DOE.
const SavedGdoe& generate_gdoe(Project& project, const std::string& grid_name,
                               const std::string& gdoe_name, bool snap);

/// Clusters the initial embedding and saves the centroids as an explicit grid.
Clustering cluster_initial(Project& project, ClusterMethod method, std::size_t k,
                           std::uint64_t seed, const std::string& grid_name);

/// Random subset of the initial design saved as a G-DOE.
const SavedGdoe& sample_random(Project& project, std::size_t n, std::uint64_t seed,
                               const std::string& gdoe_name);

/// Stores responses for a named design; every trial id must exist there.
void set_responses(Project& project, const std::string& design_name,
                   std::vector<ResponseRecord> records);

enum class Metric { kLcl, kMean };
std::string to_string(Metric metric);
Metric metric_from_string(const std::string& text);

struct SurfaceReport {
  std::string design;
  Metric metric = Metric::kLcl;
  Goal goal = Goal::kMax;
  std::vector<std::string> factor_names;
  Surface surface;
  Optimum optimum;
  Trial optimum_trial;  // decoded at the optimum
  std::int64_t best_trial_id = 0;
  Trial best_trial;
  Point2 best_point;
  double best_value = 0.0;
};

nlohmann::json to_json(const SurfaceReport& report, bool include_map = true);

/// Table-style CSV: kind, factor settings, lat1u, lat2u, value; one row for
/// the best executed trial and one for the interpolated optimum.
void write_report_csv(std::ostream& out, const SurfaceReport& report);

SurfaceReport response_surface(const Project& project, const std::string& design_name,
                               int resolution, Goal goal, Metric metric, bool snap);

ImportanceResult factor_importance(const Project& project, const std::string& design_name,
                                   Metric metric, const ImportanceConfig& config);

/// Per-cell normalized level of one factor decoded over the uniformed square.
FieldMap factor_map(const Project& project, const std::string& factor, int resolution);

FieldMap density_of_initial(const Project& project, int resolution);

}  // namespace gdoe
