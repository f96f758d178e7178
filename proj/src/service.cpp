#include "gdoe/service.hpp"

#include <functional>
#include <sstream>

#include <httplib.h>

#include "gdoe/json_io.hpp"

namespace gdoe {

using nlohmann::json;

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::kNotFound:
    case ErrorCode::kState:
      return 404;
    case ErrorCode::kConflict:
      return 409;
    case ErrorCode::kContract:
    case ErrorCode::kNumeric:
    case ErrorCode::kTraining:
    case ErrorCode::kIo:
      return 500;
    default:
      return 422;
  }
}

namespace {

void send_json(httplib::Response& res, const json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view code,
                const std::string& message) {
  send_json(res, {{"code", code}, {"message", message}}, status);
}

using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

Handler guarded(Handler fn) {
  return [fn = std::move(fn)](const httplib::Request& req, httplib::Response& res) {
    try {
      fn(req, res);
    } catch (const Error& e) {
      send_error(res, http_status(e.code()), to_string(e.code()), e.what());
    } catch (const json::exception& e) {
      send_error(res, 422, "validation", std::string("bad request body: ") + e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, "internal", e.what());
    }
  };
}

json body_json(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  return json::parse(req.body);
}

std::string param(const httplib::Request& req, const std::string& name,
                  const std::string& fallback) {
  return req.has_param(name) ? req.get_param_value(name) : fallback;
}

long long int_param(const httplib::Request& req, const std::string& name, long long fallback) {
  if (!req.has_param(name)) return fallback;
  const std::string text = req.get_param_value(name);
  try {
    std::size_t used = 0;
    const long long v = std::stoll(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorCode::kValidation, "query parameter " + name + " must be an integer");
  }
}

double double_param(const httplib::Request& req, const std::string& name, double fallback) {
  if (!req.has_param(name)) return fallback;
  try {
    return std::stod(req.get_param_value(name));
  } catch (const std::exception&) {
    throw Error(ErrorCode::kValidation, "query parameter " + name + " must be a number");
  }
}

int resolution_param(const httplib::Request& req) {
  const long long res = int_param(req, "res", 100);
  if (res < 2 || res > 1000) throw Error(ErrorCode::kValidation, "res must be in [2, 1000]");
  return static_cast<int>(res);
}

json points_json(std::span<const Point2> points) {
  json out = json::array();
  for (const auto& p : points) out.push_back(to_json(p));
  return out;
}

json gdoe_json(const std::string& name, const SavedGdoe& g) {
  return {{"name", name},
          {"grid", g.grid},
          {"model_generation", g.model_generation},
          {"snap", g.snap},
          {"design", to_json(g.design)},
          {"uniformed", points_json(g.uniformed)},
          {"diagnostics", to_json(g.diagnostics)}};
}

json project_summary(const Project& p) {
  json factors = json::array();
  for (const auto& f : p.factors) factors.push_back(to_json(f));
  json grids = json::object();
  for (const auto& [name, spec] : p.grids) grids[name] = to_json(spec);
  json gdoes = json::array();
  for (const auto& [name, g] : p.gdoes) {
    gdoes.push_back({{"name", name},
                     {"grid", g.grid},
                     {"model_generation", g.model_generation},
                     {"n_trials", g.design.size()},
                     {"flagged", g.diagnostics.flagged()}});
  }
  json responses = json::array();
  for (const auto& [name, records] : p.responses) {
    responses.push_back({{"design", name}, {"count", records.size()}});
  }
  json model = nullptr;
  if (p.model) {
    model = {{"generation", p.model_generation},
             {"config", vae::to_json(p.model->config)},
             {"epochs_recorded", p.history.size()}};
    if (!p.history.empty()) model["last_epoch"] = vae::to_json(p.history.back());
  }
  return {{"schema_version", p.schema_version},
          {"factors", factors},
          {"constraints", p.constraints},
          {"full_factorial_size", p.full_factorial_size},
          {"initial_design_size", p.initial_design ? p.initial_design->size() : 0},
          {"model", model},
          {"grids", grids},
          {"gdoes", gdoes},
          {"responses", responses},
          {"seeds", p.seeds}};
}

}  // namespace

Service::Service(Project project, std::filesystem::path path)
    : project_(std::move(project)),
      path_(std::move(path)),
      server_(std::make_unique<httplib::Server>()),
      status_({{"state", "idle"}}) {
  install_routes();
}

Service::~Service() {
  stop();
  join_training();
}

void Service::mount_static(const std::filesystem::path& dir) {
  if (!server_->set_mount_point("/", dir.string())) {
    throw Error(ErrorCode::kNotFound, "static directory " + dir.string() + " does not exist");
  }
}

int Service::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = server_->bind_to_any_port(host);
    if (bound < 0) throw Error(ErrorCode::kIo, "cannot bind " + host);
    return bound;
  }
  if (!server_->bind_to_port(host, port)) {
    throw Error(ErrorCode::kIo, "cannot bind " + host + ":" + std::to_string(port));
  }
  return port;
}

void Service::listen() { server_->listen_after_bind(); }

void Service::stop() {
  if (server_) server_->stop();
}

void Service::join_training() {
  if (worker_.joinable()) worker_.join();
}

json Service::training_status() const {
  std::lock_guard lock(status_mutex_);
  return status_;
}

void Service::persist() {
  if (!path_.empty()) save_project(project_, path_);
}

void Service::start_training(const vae::TrainingConfig& config) {
  // Caller holds the exclusive gate and has checked training_.
  const Design design = project_.require_initial_design();
  config.validate();
  join_training();
  training_ = true;
  {
    std::lock_guard lock(status_mutex_);
    status_ = {{"state", "running"}, {"epoch", 0}, {"epochs", config.epochs}};
  }
  worker_ = std::thread([this, design, config] {
    try {
      auto result = vae::train(encode_design(design), config, [this, &config](const auto& r) {
        std::lock_guard lock(status_mutex_);
        status_ = {{"state", "running"},
                   {"epoch", r.epoch},
                   {"epochs", config.epochs},
                   {"last", vae::to_json(r)}};
      });
      std::size_t generation = 0;
      {
        std::unique_lock gate(gate_);
        project_.model = std::move(result.model);
        project_.history = std::move(result.history);
        ++project_.model_generation;
        project_.seeds["train"] = config.seed;
        generation = project_.model_generation;
        persist();
      }
      std::lock_guard lock(status_mutex_);
      status_["state"] = "done";
      status_["generation"] = generation;
    } catch (const std::exception& e) {
      std::lock_guard lock(status_mutex_);
      status_["state"] = "failed";
      status_["error"] = e.what();
      if (const auto* te = dynamic_cast<const TrainingError*>(&e)) status_["epoch"] = te->epoch();
    }
    training_ = false;
  });
}

void Service::install_routes() {
  auto& s = *server_;
  // Mutations share the exclusive gate and are refused while training runs.
  auto mutate = [this](const std::function<json(const httplib::Request&)>& fn) {
    return guarded([this, fn](const httplib::Request& req, httplib::Response& res) {
      std::unique_lock gate(gate_);
      if (training_) throw Error(ErrorCode::kConflict, "a training job is running");
      json out = fn(req);
      persist();
      send_json(res, out);
    });
  };
  auto read = [this](const std::function<void(const httplib::Request&, httplib::Response&)>& fn) {
    return guarded([this, fn](const httplib::Request& req, httplib::Response& res) {
      std::shared_lock gate(gate_);
      fn(req, res);
    });
  };

  s.Get("/api/project", read([this](const auto&, auto& res) {
          send_json(res, project_summary(project_));
        }));

  s.Post("/api/design/build", mutate([this](const httplib::Request& req) {
           const json body = body_json(req);
           std::optional<std::vector<std::string>> constraints;
           if (body.contains("constraints")) {
             constraints = body.at("constraints").get<std::vector<std::string>>();
           }
           const auto counts = build_initial_design(project_, constraints);
           return json{{"full", counts.full}, {"filtered", counts.filtered}};
         }));

  s.Post("/api/train", guarded([this](const httplib::Request& req, httplib::Response& res) {
           const json body = body_json(req);
           std::unique_lock gate(gate_);
           if (training_) throw Error(ErrorCode::kConflict, "a training job is already running");
           start_training(vae::training_config_from_json(body));
           send_json(res, training_status(), 202);
         }));

  s.Get("/api/train/status", guarded([this](const auto&, auto& res) {
          send_json(res, training_status());
        }));

  s.Get("/api/embedding", read([this](const auto&, auto& res) {
          const auto e = initial_embedding(project_);
          send_json(res, {{"trial_ids", e.trial_ids},
                          {"mean", points_json(e.mean)},
                          {"uniformed", points_json(e.uniformed)}});
        }));

  s.Get("/api/map/density", read([this](const auto& req, auto& res) {
          send_json(res, to_json(density_of_initial(project_, resolution_param(req))));
        }));

  s.Get("/api/map/gradient", read([this](const auto& req, auto& res) {
          const int r = resolution_param(req);
          const auto agg = aggregation_from_string(param(req, "agg", "sum"));
          const FieldMap map = gradient_map(project_.require_model(), r, r, agg);
          json out = to_json(map);
          out["aggregation"] = to_string(agg);
          if (req.has_param("threshold")) {
            const double threshold = double_param(req, "threshold", 0.5);
            json cells = json::array();
            for (const auto& c : extract_borders(map, threshold)) cells.push_back({c.i, c.j});
            out["threshold"] = threshold;
            out["borders"] = std::move(cells);
            out["segments"] = count_segments(map, threshold);
          }
          send_json(res, out);
        }));

  s.Get(R"(/api/map/factor/([^/]+))", read([this](const auto& req, auto& res) {
          send_json(res, to_json(factor_map(project_, req.matches[1], resolution_param(req))));
        }));

  s.Post("/api/grid/preview", read([this](const auto& req, auto& res) {
           const json body = body_json(req);
           const json& spec_json = body.contains("grid") ? body.at("grid") : body;
           const GridSpec spec = grid_spec_from_json(spec_json);
           const auto g = preview_grid(project_, spec, body.value("snap", false));
           send_json(res, {{"points", points_json(make_grid_uniformed(spec))},
                           {"kept", points_json(g.uniformed)},
                           {"design", to_json(g.design)},
                           {"diagnostics", to_json(g.diagnostics)}});
         }));

  s.Post("/api/grid/save", mutate([this](const httplib::Request& req) {
           const json body = body_json(req);
           const std::string name = body.at("name").get<std::string>();
           if (name.empty()) throw Error(ErrorCode::kValidation, "grid name is empty");
           const GridSpec spec = grid_spec_from_json(body.at("grid"));
           project_.grids[name] = spec;
           project_.cluster_grids.erase(name);
           return json{{"name", name}, {"grid", to_json(spec)}};
         }));

  s.Post("/api/generate", mutate([this](const httplib::Request& req) {
           const json body = body_json(req);
           const std::string grid = body.at("grid").get<std::string>();
           const std::string name = body.value("name", grid);
           const auto& g = generate_gdoe(project_, grid, name, body.value("snap", false));
           return gdoe_json(name, g);
         }));

  s.Post("/api/sample", mutate([this](const httplib::Request& req) {
           const json body = body_json(req);
           const std::string name = body.at("name").get<std::string>();
           const auto& g = sample_random(project_, body.at("n").get<std::size_t>(),
                                         body.value("seed", std::uint64_t{0}), name);
           return gdoe_json(name, g);
         }));

  s.Post("/api/cluster", mutate([this](const httplib::Request& req) {
           const json body = body_json(req);
           const auto method = cluster_method_from_string(body.value("method", "kmeans"));
           const auto c = cluster_initial(project_, method, body.at("k").get<std::size_t>(),
                                          body.value("seed", std::uint64_t{0}),
                                          body.value("name", std::string{}));
           return to_json(c);
         }));

  s.Post("/api/responses", mutate([this](const httplib::Request& req) {
           const json body = body_json(req);
           const std::string design = body.value("design", std::string(kInitialDesign));
           const double confidence = body.value("confidence", 0.90);
           std::vector<ResponseRecord> records;
           for (const auto& r : body.at("records")) {
             records.push_back(compute_lcl(r.at("replicates").get<std::vector<double>>(),
                                           confidence, r.at("trial_id").get<std::int64_t>()));
           }
           set_responses(project_, design, records);
           json out = json::array();
           for (const auto& r : records) out.push_back(to_json(r));
           return json{{"design", design}, {"records", out}};
         }));

  s.Get("/api/surface", read([this](const auto& req, auto& res) {
          const auto report = response_surface(
              project_, param(req, "design", kInitialDesign), resolution_param(req),
              goal_from_string(param(req, "goal", "max")),
              metric_from_string(param(req, "metric", "lcl")), param(req, "snap", "0") == "1");
          send_json(res, to_json(report));
        }));

  s.Get("/api/importance", read([this](const auto& req, auto& res) {
          ImportanceConfig config;
          const long long reps = int_param(req, "reps", 10);
          if (reps < 0) throw Error(ErrorCode::kValidation, "reps must be non-negative");
          config.replications = static_cast<std::size_t>(reps);
          config.seed = static_cast<std::uint64_t>(int_param(req, "seed", 0));
          const auto result =
              factor_importance(project_, param(req, "design", kInitialDesign),
                                metric_from_string(param(req, "metric", "lcl")), config);
          send_json(res, to_json(result));
        }));

  s.Get("/api/export/design.csv", read([this](const auto& req, auto& res) {
          std::ostringstream out;
          write_design_csv(out, project_.design(param(req, "design", kInitialDesign)));
          res.set_content(out.str(), "text/csv");
        }));
}

}  // namespace gdoe
