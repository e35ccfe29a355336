#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "ntg/generator.hpp"
#include "ntg/model.hpp"

namespace httplib {
class Server;
}

namespace ntg {

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::filesystem::path checkpoint_dir = ".";
  std::string checkpoint = "final.ntgw";
  std::filesystem::path limits;  // empty: permissive defaults
  std::vector<std::string> styles;
  std::size_t max_nodes = 5000;  // per session
  std::size_t max_sessions = 256;
  long max_steps_per_request = 1000;
  double temperature = 1.0;
  double region_margin = 500.0;

  std::filesystem::path checkpoint_path() const;
};

/// key=value text; unknown keys are rejected.
ServiceConfig parse_service_config(const std::string &text, ServiceConfig base = {});

/// Reads the config file named by NTG_CONFIG (else `fallback`, if given),
/// then applies NTG_CHECKPOINT_DIR.
ServiceConfig load_service_config(const std::optional<std::filesystem::path> &fallback = std::nullopt);

struct ApiResponse {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

/// Events after a cursor, in wire encoding.
struct EventBatch {
  std::vector<std::string> events;
  std::size_t next = 0;
  bool terminal = false;  // session finished and every event delivered
  bool gone = false;      // session unknown or deleted
};

/// Interactive generation sessions. Mutations of one session are
/// serialized by its own mutex; different sessions never wait on each other.
class SessionManager {
 public:
  SessionManager(std::shared_ptr<const ModelParams> model, Limits limits, ServiceConfig cfg);

  ApiResponse styles() const;
  ApiResponse create(const std::string &body);
  ApiResponse list() const;
  ApiResponse info(const std::string &id) const;
  ApiResponse step(const std::string &id, const std::optional<std::string> &n);
  ApiResponse graph(const std::string &id, const std::string &format = "json") const;
  ApiResponse events(const std::string &id, std::size_t from) const;
  ApiResponse remove(const std::string &id);

  /// Blocks up to `timeout` for events beyond `from`.
  EventBatch wait_events(const std::string &id, std::size_t from, std::chrono::milliseconds timeout) const;

  /// Wakes every waiting stream and makes them finish.
  void shutdown();
  bool stopping() const { return stopping_; }

  const ServiceConfig &config() const { return cfg_; }

 private:
  struct Session {
    std::string id;
    mutable std::mutex mu;
    mutable std::condition_variable cv;
    GenSession gen;
    std::chrono::system_clock::time_point created;
    bool deleted = false;
  };

  std::shared_ptr<Session> find(const std::string &id) const;
  std::string summary(const Session &s) const;

  std::shared_ptr<const ModelParams> model_;
  Limits limits_;
  ServiceConfig cfg_;
  mutable std::shared_mutex map_mu_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t next_id_ = 1;
  std::uint64_t salt_;
  std::atomic<bool> stopping_{false};
};

/// HTTP front end: every route lives under /v1/.
class Service {
 public:
  explicit Service(SessionManager &manager);
  ~Service();
  Service(const Service &) = delete;
  Service &operator=(const Service &) = delete;

  /// Binds (port 0 picks a free port) and returns the bound port, or -1.
  int bind(const std::string &host, int port);
  /// Serves until stop(); blocks.
  bool run();
  void stop();
  void wait_until_ready() const;

 private:
  SessionManager &manager_;
  std::unique_ptr<httplib::Server> server_;
};

}  // namespace ntg
