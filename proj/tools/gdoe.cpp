// gdoe: command-line workflow over a project file.
//
// Exit codes: 0 success, 1 validation or missing-step error, 2 flagged
// design (constraint violation or confounded pair), 3 internal error.

#include <CLI11.hpp>

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "gdoe/error.hpp"
#include "gdoe/json_io.hpp"
#include "gdoe/project.hpp"
#include "gdoe/service.hpp"

namespace {

using gdoe::Error;
using gdoe::ErrorCode;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitFlagged = 2;
constexpr int kExitInternal = 3;

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::kContract:
    case ErrorCode::kNumeric:
    case ErrorCode::kTraining:
      return kExitInternal;
    default:
      return kExitValidation;
  }
}

// Shortest round-trip text for a double.
std::string number(double value) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, r.ptr);
}

// Writes to a file, or stdout for "-".
void write_output(const std::string& path, const std::string& text) {
  if (path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  out << text;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string points_csv(std::span<const gdoe::Point2> points) {
  std::ostringstream out;
  out << "index,lat1u,lat2u\n";
  for (std::size_t i = 0; i < points.size(); ++i) {
    out << i << ',' << number(points[i].x) << ',' << number(points[i].y)
        << '\n';
  }
  return out.str();
}

struct Options {
  std::string project = "gdoe-project.json";
};

}  // namespace

int main(int argc, char** argv) {
  gdoe::tune_allocator();
  CLI::App app{"Generative design of experiments"};
  app.require_subcommand(1);
  Options opt;
  if (const char* env = std::getenv("GDOE_PROJECT")) opt.project = env;
  app.add_option("--project", opt.project, "Project file")->capture_default_str();

  int result = kExitOk;
  std::function<void()> action;

  // init
  auto* init = app.add_subcommand("init", "Create a project skeleton");
  std::string init_file;
  std::string preset = "cnn";
  bool force = false;
  init->add_option("file", init_file, "Project file to create")->required();
  init->add_option("--preset", preset, "cnn, 2x4, or empty")->capture_default_str();
  init->add_flag("--force", force, "Overwrite an existing file");
  init->callback([&] {
    action = [&] {
      if (!force && std::filesystem::exists(init_file)) {
        throw Error(ErrorCode::kConflict, init_file + " exists; pass --force to overwrite");
      }
      gdoe::save_project(gdoe::make_project(preset), init_file);
      std::cout << "created " << init_file << " (" << preset << ")\n";
    };
  });

  // design build / export
  auto* design = app.add_subcommand("design", "Initial design");
  design->require_subcommand(1);
  auto* build = design->add_subcommand("build", "Full factorial plus constraint filter");
  std::vector<std::string> constraints;
  bool no_constraints = false;
  build->add_option("--constraint", constraints, "Constraint expression (repeatable)");
  build->add_flag("--no-constraints", no_constraints, "Clear the constraint list");
  build->callback([&] {
    action = [&] {
      auto project = gdoe::load_project(opt.project);
      std::optional<std::vector<std::string>> list;
      if (!constraints.empty() || no_constraints) list = constraints;
      const auto counts = gdoe::build_initial_design(project, list);
      gdoe::save_project(project, opt.project);
      std::cout << counts.full << " → " << counts.filtered << '\n';
    };
  });
  auto* dexport = design->add_subcommand("export", "Write a design as CSV");
  std::string export_name = gdoe::kInitialDesign;
  std::string export_out = "-";
  dexport->add_option("--name", export_name, "Design name")->capture_default_str();
  dexport->add_option("--out", export_out, "Output path or -")->capture_default_str();
  dexport->callback([&] {
    action = [&] {
      const auto project = gdoe::load_project(opt.project);
      std::ostringstream out;
      gdoe::write_design_csv(out, project.design(export_name));
      write_output(export_out, out.str());
    };
  });

  // train
  auto* train = app.add_subcommand("train", "Train the beta-VAE on the initial design");
  gdoe::vae::TrainingConfig cfg;
  double noise = 0.0;
  bool quiet = false;
  train->add_option("--beta", cfg.beta)->capture_default_str();
  train->add_option("--epochs", cfg.epochs)->capture_default_str();
  train->add_option("--batch", cfg.batch_size)->capture_default_str();
  train->add_option("--seed", cfg.seed)->capture_default_str();
  train->add_option("--dup-train", cfg.train_dup)->capture_default_str();
  train->add_option("--dup-test", cfg.test_dup)->capture_default_str();
  train->add_option("--lr", cfg.learning_rate)->capture_default_str();
  train->add_option("--noise", noise, "Gaussian input noise sigma (0 = off)");
  train->add_flag("--quiet", quiet, "Only print the final epoch");
  train->callback([&] {
    action = [&] {
      auto project = gdoe::load_project(opt.project);
      cfg.noise.enabled = noise > 0.0;
      cfg.noise.alpha = noise;
      cfg.validate();
      gdoe::train_model(project, cfg, [&](const gdoe::vae::EpochRecord& r) {
        if (!quiet && (r.epoch % 50 == 0 || r.epoch == cfg.epochs)) {
          std::cout << "epoch " << r.epoch << " train " << number(r.train_loss)
                    << " test " << number(r.test_loss) << " bce "
                    << number(r.test_bce) << " kl " << number(r.test_kl)
                    << '\n';
        }
      });
      gdoe::save_project(project, opt.project);
      const auto& last = project.history.back();
      std::cout << "trained generation " << project.model_generation << ": test loss "
                << number(last.test_loss) << '\n';
    };
  });

  // embed
  auto* embed = app.add_subcommand("embed", "Latent coordinates of the initial design");
  std::string embed_out = "-";
  embed->add_option("--out", embed_out, "CSV path or -")->capture_default_str();
  embed->callback([&] {
    action = [&] {
      const auto project = gdoe::load_project(opt.project);
      const auto e = gdoe::initial_embedding(project);
      std::ostringstream out;
      out << "trial_id,lat1,lat2,lat1u,lat2u\n";
      for (std::size_t i = 0; i < e.trial_ids.size(); ++i) {
        out << e.trial_ids[i] << ',' << number(e.mean[i].x) << ','
            << number(e.mean[i].y) << ',' << number(e.uniformed[i].x)
            << ',' << number(e.uniformed[i].y) << '\n';
      }
      write_output(embed_out, out.str());
    };
  });

  // grid
  auto* grid = app.add_subcommand("grid", "Define and save a latent grid");
  std::string grid_type = "square";
  std::string grid_name;
  std::string grid_space;
  gdoe::GridSpec spec;
  bool no_center = false;
  grid->add_option("--type", grid_type, "square, polar, or double-square")
      ->capture_default_str();
  grid->add_option("--name", grid_name, "Saved grid name")->required();
  grid->add_option("--nx", spec.nx)->capture_default_str();
  grid->add_option("--ny", spec.ny)->capture_default_str();
  grid->add_option("--rings", spec.rings)->capture_default_str();
  grid->add_option("--angular", spec.angular)->capture_default_str();
  grid->add_flag("--no-center", no_center, "Polar grid without the centre point");
  grid->add_option("--inner", spec.inner_radius)->capture_default_str();
  grid->add_option("--outer", spec.outer_radius)->capture_default_str();
  grid->add_option("--rotation", spec.rotation, "Radians")->capture_default_str();
  grid->add_option("--space", grid_space, "uniformed or original");
  grid->callback([&] {
    action = [&] {
      auto project = gdoe::load_project(opt.project);
      json j = {{"type", grid_type},         {"nx", spec.nx},
                {"ny", spec.ny},               {"rings", spec.rings},
                {"angular", spec.angular},     {"center", !no_center},
                {"inner_radius", spec.inner_radius}, {"outer_radius", spec.outer_radius},
                {"rotation", spec.rotation}};
      if (!grid_space.empty()) j["space"] = grid_space;
      const auto parsed = gdoe::grid_spec_from_json(j);
      const auto points = gdoe::make_grid_uniformed(parsed);
      project.grids[grid_name] = parsed;
      project.cluster_grids.erase(grid_name);
      gdoe::save_project(project, opt.project);
      std::cout << points_csv(points);
    };
  });

  // cluster
  auto* cluster = app.add_subcommand("cluster", "Cluster the initial embedding");
  std::string method = "kmeans";
  std::size_t k = 0;
  std::uint64_t cluster_seed = 0;
  std::string cluster_name;
  cluster->add_option("--method", method, "kmeans or ward")->capture_default_str();
  cluster->add_option("-k", k, "Number of clusters")->required();
  cluster->add_option("--seed", cluster_seed)->capture_default_str();
  cluster->add_option("--name", cluster_name, "Save centroids as this grid");
  cluster->callback([&] {
    action = [&] {
      auto project = gdoe::load_project(opt.project);
      const auto c = gdoe::cluster_initial(project, gdoe::cluster_method_from_string(method), k,
                                           cluster_seed, cluster_name);
      if (!cluster_name.empty()) gdoe::save_project(project, opt.project);
      std::cout << "inertia " << number(c.inertia) << '\n' << points_csv(c.centroids);
    };
  });

  // generate
  auto* generate = app.add_subcommand("generate", "Decode a saved grid into a G-DOE");
  std::string gen_grid;
  std::string gen_name;
  bool snap = false;
  bool allow_flagged = false;
  std::string gen_out;
  std::string gen_diag;
  generate->add_option("--grid", gen_grid, "Saved grid name")->required();
  generate->add_option("--name", gen_name, "G-DOE name (defaults to the grid name)");
  generate->add_flag("--snap", snap, "Snap continuous factors to declared levels");
  generate->add_flag("--allow-flagged", allow_flagged, "Violations only warn");
  generate->add_option("--out", gen_out, "Design CSV path or -");
  generate->add_option("--diagnostics", gen_diag, "Diagnostics JSON path");
  generate->callback([&] {
    action = [&] {
      auto project = gdoe::load_project(opt.project);
      const std::string name = gen_name.empty() ? gen_grid : gen_name;
      const auto& g = gdoe::generate_gdoe(project, gen_grid, name, snap);
      gdoe::save_project(project, opt.project);
      std::ostringstream csv;
      gdoe::write_design_csv(csv, g.design);
      if (!gen_out.empty()) write_output(gen_out, csv.str());
      const std::string diag = gdoe::to_json(g.diagnostics).dump(1) + "\n";
      if (gen_diag.empty()) {
        std::filesystem::path sidecar = gen_out.empty() || gen_out == "-"
                                            ? std::filesystem::path(name + ".diagnostics.json")
                                            : std::filesystem::path(gen_out);
        if (!(gen_out.empty() || gen_out == "-")) sidecar.replace_extension(".diagnostics.json");
        write_output(sidecar.string(), diag);
      } else {
        write_output(gen_diag, diag);
      }
      const auto& d = g.diagnostics;
      std::cerr << name << ": " << d.n_trials << " points, " << d.n_unique << " unique trials, " << d.violations.size()
                << " violations, " << d.confounded_pairs.size() << " confounded pairs, "
                << d.duplicates.size() << " duplicates collapsed\n";
      if (d.flagged()) {
        std::cerr << (allow_flagged ? "warning" : "error")
                  << ": design has constraint violations or confounded factors\n";
        if (!allow_flagged) result = kExitFlagged;
      }
    };
  });

  // sample
  auto* sample = app.add_subcommand("sample", "Random subset of the initial design");
  std::size_t sample_n = 64;
  std::uint64_t sample_seed = 0;
  std::string sample_name;
  std::string sample_out;
  sample->add_option("-n", sample_n)->capture_default_str();
  sample->add_option("--seed", sample_seed)->capture_default_str();
  sample->add_option("--name", sample_name, "G-DOE name")->required();
  sample->add_option("--out", sample_out, "Design CSV path or -");
  sample->callback([&] {
    action = [&] {
      auto project = gdoe::load_project(opt.project);
      const auto& g = gdoe::sample_random(project, sample_n, sample_seed, sample_name);
      gdoe::save_project(project, opt.project);
      std::ostringstream csv;
      gdoe::write_design_csv(csv, g.design);
      if (!sample_out.empty()) write_output(sample_out, csv.str());
      std::cerr << sample_name << ": " << g.design.size() << " trials\n";
    };
  });

  // maps
  auto* maps = app.add_subcommand("maps", "Density, gradient, or factor maps");
  bool density = false;
  bool gradient = false;
  std::string factor;
  int res = 100;
  std::string agg = "sum";
  double threshold = 0.5;
  std::string maps_out = "-";
  maps->add_flag("--density", density);
  maps->add_flag("--gradient", gradient);
  maps->add_option("--factor", factor, "Decoded level map of one factor");
  maps->add_option("--res", res)->capture_default_str();
  maps->add_option("--agg", agg, "sum or max")->capture_default_str();
  maps->add_option("--threshold", threshold, "Gradient border threshold")->capture_default_str();
  maps->add_option("--out", maps_out, "CSV path or -")->capture_default_str();
  maps->callback([&] {
    action = [&] {
      if (static_cast<int>(density) + static_cast<int>(gradient) + (factor.empty() ? 0 : 1) != 1) {
        throw Error(ErrorCode::kValidation, "choose exactly one of --density, --gradient, --factor");
      }
      if (res < 2) throw Error(ErrorCode::kValidation, "--res must be at least 2");
      const auto project = gdoe::load_project(opt.project);
      gdoe::FieldMap map;
      if (density) {
        map = gdoe::density_of_initial(project, res);
      } else if (gradient) {
        map = gdoe::gradient_map(project.require_model(), res, res,
                                 gdoe::aggregation_from_string(agg));
      } else {
        map = gdoe::factor_map(project, factor, res);
      }
      std::ostringstream out;
      gdoe::write_field_csv(out, map);
      write_output(maps_out, out.str());
      if (gradient) {
        std::cerr << gdoe::extract_borders(map, threshold).size() << " border cells, "
                  << gdoe::count_segments(map, threshold) << " segments at threshold "
                  << threshold << '\n';
      }
    };
  });

  // respond
  auto* respond = app.add_subcommand("respond", "Ingest replicated responses");
  std::string respond_csv;
  std::string respond_design = gdoe::kInitialDesign;
  double confidence = 0.90;
  respond->add_option("--csv", respond_csv, "trial_id,r1,r2,... rows")->required();
  respond->add_option("--design", respond_design)->capture_default_str();
  respond->add_option("--confidence", confidence)->capture_default_str();
  respond->callback([&] {
    action = [&] {
      auto project = gdoe::load_project(opt.project);
      std::istringstream in(read_file(respond_csv));
      auto records = gdoe::read_responses_csv(in, confidence);
      const std::size_t n = records.size();
      gdoe::set_responses(project, respond_design, std::move(records));
      gdoe::save_project(project, opt.project);
      std::cout << "trial_id,mean,std,lcl\n";
      for (const auto& r : project.responses.at(respond_design)) {
        std::cout << r.trial_id << ',' << number(r.mean) << ','
                  << number(r.std_dev) << ',' << number(r.lcl) << '\n';
      }
      std::cerr << n << " response records for " << respond_design << '\n';
    };
  });

  // surface
  auto* surface = app.add_subcommand("surface", "Interpolated response and optimum");
  std::string surface_design = gdoe::kInitialDesign;
  int surface_res = 100;
  std::string goal = "max";
  std::string metric = "lcl";
  bool surface_snap = false;
  std::string surface_out = "-";
  std::string surface_map;
  surface->add_option("--design", surface_design)->capture_default_str();
  surface->add_option("--res", surface_res)->capture_default_str();
  surface->add_option("--goal", goal, "max or min")->capture_default_str();
  surface->add_option("--metric", metric, "lcl or mean")->capture_default_str();
  surface->add_flag("--snap", surface_snap, "Snap the decoded optimum");
  surface->add_option("--out", surface_out, "Report CSV path or -")->capture_default_str();
  surface->add_option("--map", surface_map, "Also write the surface lattice CSV");
  surface->callback([&] {
    action = [&] {
      const auto project = gdoe::load_project(opt.project);
      const auto report = gdoe::response_surface(
          project, surface_design, surface_res, gdoe::goal_from_string(goal),
          gdoe::metric_from_string(metric), surface_snap);
      if (report.surface.nearest_only) {
        std::cerr << "warning: trial points cannot be triangulated; surface uses nearest trial only\n";
      }
      std::ostringstream out;
      gdoe::write_report_csv(out, report);
      write_output(surface_out, out.str());
      if (!surface_map.empty()) {
        std::ostringstream map;
        gdoe::write_field_csv(map, report.surface.map);
        write_output(surface_map, map.str());
      }
    };
  });

  // importance
  auto* imp = app.add_subcommand("importance", "Permutation importance of factors");
  std::string imp_design = gdoe::kInitialDesign;
  gdoe::ImportanceConfig imp_cfg;
  std::string imp_metric = "lcl";
  imp->add_option("--design", imp_design)->capture_default_str();
  imp->add_option("--reps", imp_cfg.replications)->capture_default_str();
  imp->add_option("--seed", imp_cfg.seed)->capture_default_str();
  imp->add_option("--epochs", imp_cfg.epochs)->capture_default_str();
  imp->add_option("--metric", imp_metric, "lcl or mean")->capture_default_str();
  imp->callback([&] {
    action = [&] {
      const auto project = gdoe::load_project(opt.project);
      const auto r = gdoe::factor_importance(project, imp_design,
                                             gdoe::metric_from_string(imp_metric), imp_cfg);
      std::cout << "rank,factor,relative_loss_increase\n";
      for (std::size_t k = 0; k < r.ranking.size(); ++k) {
        const auto f = r.ranking[k];
        std::cout << k + 1 << ',' << r.factors[f] << ',' << number(r.scores[f]) << '\n';
      }
    };
  });

  // serve
  auto* serve = app.add_subcommand("serve", "Local HTTP service");
  int port = 0;
  std::string host = "127.0.0.1";
  std::string static_dir;
  serve->add_option("--port", port, "Port (default: GDOE_PORT or 8080)");
  serve->add_option("--host", host)->capture_default_str();
  serve->add_option("--static", static_dir, "Serve studio assets from this directory");
  serve->callback([&] {
    action = [&] {
      if (port == 0) {
        const char* env = std::getenv("GDOE_PORT");
        port = env != nullptr ? std::atoi(env) : 8080;
      }
      gdoe::Service service(gdoe::load_project(opt.project), opt.project);
      if (!static_dir.empty()) service.mount_static(static_dir);
      const int bound = service.bind(host, port);
      std::cerr << "serving " << opt.project << " on http://" << host << ':' << bound << '\n';
      service.listen();
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }
  try {
    if (action) action();
  } catch (const Error& e) {
    std::cerr << "error (" << gdoe::to_string(e.code()) << "): " << e.what() << '\n';
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
  return result;
}
