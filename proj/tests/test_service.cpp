#include <doctest.h>

#include <chrono>
#include <filesystem>
#include <thread>

#include "gdoe/project.hpp"
#include "gdoe/service.hpp"

#include <httplib.h>
#include <json.hpp>

using namespace gdoe;
using nlohmann::json;

namespace {

class Running {
 public:
  explicit Running(Project p, std::filesystem::path path = {})
      : service_(std::move(p), std::move(path)) {
    port_ = service_.bind("127.0.0.1", 0);
    thread_ = std::thread([this] { service_.listen(); });
    client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
    client_->set_read_timeout(120, 0);
    for (int i = 0; i < 200 && !client_->Get("/api/train/status"); ++i) {
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
  }
  ~Running() {
    service_.join_training();
    service_.stop();
    thread_.join();
  }

  std::pair<int, json> get(const std::string& path) {
    auto res = client_->Get(path);
    REQUIRE(res);
    return {res->status, parse(res->body)};
  }
  std::pair<int, json> post(const std::string& path, const json& body) {
    auto res = client_->Post(path, body.dump(), "application/json");
    REQUIRE(res);
    return {res->status, parse(res->body)};
  }
  std::string raw(const std::string& path) {
    auto res = client_->Get(path);
    REQUIRE(res);
    return res->body;
  }
  Service& service() { return service_; }

 private:
  static json parse(const std::string& body) {
    return json::parse(body, nullptr, false);
  }

  Service service_;
  int port_ = 0;
  std::thread thread_;
  std::unique_ptr<httplib::Client> client_;
};

json quick_training(int epochs = 10) {
  return {{"epochs", epochs}, {"train_dup", 10}, {"test_dup", 5}, {"seed", 2}};
}

void wait_done(Running& r) {
  r.service().join_training();
  const auto [status, body] = r.get("/api/train/status");
  CHECK(status == 200);
  CHECK(body["state"] == "done");
}

}  // namespace

TEST_CASE("status codes") {
  CHECK(http_status(ErrorCode::kNotFound) == 404);
  CHECK(http_status(ErrorCode::kConflict) == 409);
  CHECK(http_status(ErrorCode::kValidation) == 422);
  CHECK(http_status(ErrorCode::kSyntax) == 422);
  CHECK(http_status(ErrorCode::kIo) == 500);
}

TEST_CASE("fresh project") {
  Running r(make_project("cnn"));
  auto [s0, status] = r.get("/api/train/status");
  CHECK(s0 == 200);
  CHECK(status == json{{"state", "idle"}});

  auto [s1, missing] = r.get("/api/embedding");
  CHECK(s1 == 404);
  CHECK(missing["code"] == "not_found");
  CHECK(missing["message"].is_string());

  auto [s2, built] = r.post("/api/design/build", json::object());
  CHECK(s2 == 200);
  CHECK(built == json{{"full", 7200}, {"filtered", 1920}});

  auto [s3, summary] = r.get("/api/project");
  CHECK(s3 == 200);
  CHECK(summary["initial_design_size"] == 1920);
  CHECK(summary["model"].is_null());

  auto [s4, err] = r.get("/api/map/gradient?res=100");
  CHECK(s4 == 404);
  CHECK(err["code"] == "not_found");

  auto [s5, bad] = r.post("/api/design/build", {{"constraints", {"n1 >>"}}});
  CHECK(s5 == 422);
  CHECK(bad["code"] == "syntax");
  auto [s6, garbage] = r.post("/api/train", {{"epochs", 0}});
  CHECK(s6 == 422);
  CHECK(garbage["code"] == "validation");
  CHECK(r.get("/api/design/unknown").first == 404);
}

TEST_CASE("trained project routes") {
  const auto path = std::filesystem::temp_directory_path() / "gdoe_service_test.json";
  std::filesystem::remove(path);
  Running r(make_project("2x4"), path);
  r.post("/api/design/build", json::object());
  auto [s0, started] = r.post("/api/train", quick_training());
  CHECK(s0 == 202);
  CHECK(started["state"] == "running");
  wait_done(r);
  CHECK(r.get("/api/project").second["model"]["generation"] == 1);
  CHECK(std::filesystem::exists(path));
  CHECK(load_project(path).model.has_value());

  auto [s1, emb] = r.get("/api/embedding");
  CHECK(s1 == 200);
  CHECK(emb["uniformed"].size() == 16);

  auto [s2, gradient] = r.get("/api/map/gradient?res=100&threshold=0.5");
  CHECK(s2 == 200);
  CHECK(gradient["values"].size() == 100);
  CHECK(gradient["values"][0].size() == 100);
  CHECK(gradient["segments"].is_number());
  CHECK(r.get("/api/map/gradient?res=1").first == 422);
  CHECK(r.get("/api/map/gradient?res=abc").first == 422);
  CHECK(r.get("/api/map/density?res=40").second["values"].size() == 40);
  CHECK(r.get("/api/map/factor/F3?res=20").first == 200);
  CHECK(r.get("/api/map/factor/G9?res=20").first == 404);

  const json square = {{"type", "square"}, {"nx", 8}, {"ny", 8}};
  const auto before = r.get("/api/project").second;
  auto [s3, preview] = r.post("/api/grid/preview", {{"grid", square}});
  CHECK(s3 == 200);
  CHECK(preview["points"].size() == 64);
  CHECK(preview["diagnostics"]["n_trials"] == 64);
  CHECK(preview["kept"].size() == preview["design"]["trial_ids"].size());
  CHECK(r.get("/api/project").second == before);
  CHECK(r.post("/api/grid/preview", {{"grid", {{"type", "hexagon"}}}}).first == 422);

  CHECK(r.post("/api/generate", {{"grid", "sq8"}}).first == 404);
  CHECK(r.post("/api/grid/save", {{"name", "sq8"}, {"grid", square}}).first == 200);
  auto [s4, gen] = r.post("/api/generate", {{"grid", "sq8"}, {"name", "g8"}, {"snap", true}});
  CHECK(s4 == 200);
  CHECK(gen["diagnostics"]["n_trials"] == 64);
  const auto ids = gen["design"]["trial_ids"];
  REQUIRE(ids.size() >= 3);

  json records = json::array();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const double v = double(i);
    records.push_back({{"trial_id", ids[i]}, {"replicates", {v, v + 1, v + 2}}});
  }
  auto [s5, saved] = r.post("/api/responses", {{"design", "g8"}, {"records", records}});
  CHECK(s5 == 200);
  CHECK(saved["records"].size() == ids.size());
  CHECK(r.post("/api/responses", {{"design", "g8"}, {"records", {{{"trial_id", 999999}, {"replicates", {1, 2}}}}}})
            .first == 422);

  auto [s6, surface] = r.get("/api/surface?design=g8&res=30&metric=mean");
  CHECK(s6 == 200);
  CHECK(surface.contains("interpolated"));
  CHECK(r.get("/api/surface?design=nope").first == 404);
  CHECK(r.get("/api/surface?design=g8&goal=sideways").first == 422);

  auto [s7, importance] = r.get("/api/importance?design=g8&metric=mean&reps=2");
  CHECK(s7 == 200);
  CHECK(importance.is_object());

  CHECK(r.post("/api/sample", {{"name", "r8"}, {"n", 8}, {"seed", 1}}).first == 200);
  CHECK(r.post("/api/cluster", {{"method", "ward"}, {"k", 3}, {"name", "w3"}}).first == 200);
  CHECK(r.post("/api/generate", {{"grid", "w3"}, {"name", "w3d"}}).second["design"]["provenance"] ==
        "generated-cluster");
  CHECK(r.raw("/api/export/design.csv?design=r8").find('\n') != std::string::npos);
  std::filesystem::remove(path);
}

TEST_CASE("mutations conflict with a running training job") {
  Running r(make_project("2x4"));
  r.post("/api/design/build", json::object());
  json long_run = quick_training(400);
  long_run["train_dup"] = 50;
  CHECK(r.post("/api/train", long_run).first == 202);
  auto [s0, conflict] = r.post("/api/train", quick_training());
  CHECK(s0 == 409);
  CHECK(conflict["code"] == "conflict");
  CHECK(r.post("/api/design/build", json::object()).first == 409);
  CHECK(r.post("/api/grid/save", {{"name", "g"}, {"grid", {{"type", "square"}}}}).first == 409);
  const auto status = r.get("/api/train/status").second;
  CHECK(status["state"] == "running");
  CHECK(status["epochs"] == 400);
  wait_done(r);
  CHECK(r.post("/api/grid/save", {{"name", "g"}, {"grid", {{"type", "square"}}}}).first == 200);
}
