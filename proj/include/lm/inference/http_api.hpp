// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <string>
#include <thread>

#include "lm/core/error.hpp"
#include "lm/inference/service.hpp"
#include "lm/monitoring/monitor.hpp"

namespace httplib {
class Server;
}

namespace lm::inference {

/// HTTP status for a domain error code.
int http_status_for(ErrorCode code) noexcept;
/// {"error": code, "message": ..., plus "missing" for feature misses}.
Json error_body(const Error& e);

/// The public HTTP API over the inference service, the registry and the
/// alert log. Mutating routes require `X-API-Key` when the service has keys
/// configured. `monitor` is optional; without it POST /v1/monitor/run is 404.
class ApiServer {
 public:
  ApiServer(InferenceService& service, monitoring::AlertLog& alerts, monitoring::Monitor* monitor = nullptr);
  ~ApiServer();
  ApiServer(const ApiServer&) = delete;
  ApiServer& operator=(const ApiServer&) = delete;

  /// Binds (port 0 picks a free port) and serves on a background thread.
  int start(const std::string& host = "127.0.0.1", int port = 0);
  /// Blocks serving on the calling thread until stop().
  void listen(const std::string& host, int port);
  void stop();
  int port() const { return port_; }

 private:
  void install_routes();

  InferenceService& service_;
  monitoring::AlertLog& alerts_;
  monitoring::Monitor* monitor_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  int port_ = 0;
};

}  // namespace lm::inference
