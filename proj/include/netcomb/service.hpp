#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <string>

#include <json.hpp>

#include "netcomb/combined.hpp"

namespace netcomb {

struct ServiceOptions {
  std::filesystem::path data_root = "netcomb-data";
  ResourceLimits limits;
  std::size_t max_envs = 256;
  std::size_t max_body_bytes = 64u * 1024 * 1024;
};

/// Store root from NETCOMB_DATA_ROOT, else `fallback`.
std::filesystem::path data_root_from_env(const std::filesystem::path& fallback = "netcomb-data");

struct HttpReply {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
  std::map<std::string, std::string> headers;
};

/// HTTP status for an exception thrown by the platform.
int http_status(const std::exception& e);
/// Error object of the response envelope: code, message and, where
/// available, field / offending params / guard limits.
nlohmann::json error_body(const std::exception& e);

/// The simulation service. Every JSON response is an envelope
/// {id, version, body} or {id, version, error}. Requests may be bare bodies
/// or {id, body}; the id can also come from the X-Request-Id header.
class Service {
public:
  explicit Service(ServiceOptions opts);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Dispatches one request without network I/O.
  HttpReply handle(const std::string& method, const std::string& path, const std::string& body,
                   const std::string& request_id = {});

  /// Binds and serves on a background thread; port 0 picks a free port.
  /// Returns the bound port.
  int start(const std::string& host = "127.0.0.1", int port = 0);
  /// Binds and serves on the calling thread until stop().
  bool serve(const std::string& host, int port);
  /// Stops accepting connections and waits for in-flight requests.
  void stop();

  /// Called inside env step while that env is locked. Tests use it as a
  /// barrier to provoke concurrent steps.
  void set_step_hook(std::function<void(const std::string& env_id)> hook);
  std::size_t simulation_calls() const;

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace netcomb
