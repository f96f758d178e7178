#pragma once

// Local JSON-over-HTTP service over one project file.

#include <atomic>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <thread>

#include <json.hpp>

#include "gdoe/error.hpp"
#include "gdoe/project.hpp"

namespace httplib {
class Server;
}

namespace gdoe {

/// HTTP status for a library error code: 404 missing artifact, 409
/// conflict, 422 validation, 500 otherwise.
int http_status(ErrorCode code);

class Service {
 public:
  /// Serves `project`, persisting every mutation to `path` (no persistence
  /// when the path is empty).
  Service(Project project, std::filesystem::path path);
  ~Service();

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Serves files from `dir` at "/" (the built studio assets).
  void mount_static(const std::filesystem::path& dir);

  /// Binds host:port (port 0 picks a free one) and returns the bound port.
  int bind(const std::string& host, int port);
  /// Blocks until stop().
  void listen();
  void stop();

  /// Waits for a running training job to finish.
  void join_training();

  /// Snapshot of the training job: state idle|running|done|failed.
  nlohmann::json training_status() const;

 private:
  void install_routes();
  void persist();
  void start_training(const vae::TrainingConfig& config);

  Project project_;
  std::filesystem::path path_;
  mutable std::shared_mutex gate_;  // project reads shared, mutations exclusive
  std::unique_ptr<httplib::Server> server_;

  mutable std::mutex status_mutex_;
  nlohmann::json status_;
  std::atomic<bool> training_{false};
  std::thread worker_;
};

}  // namespace gdoe
