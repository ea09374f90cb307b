// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include "lm/features/repository.hpp"
#include "lm/model/registry.hpp"

namespace httplib {
class Server;
}

namespace lm::model {

/// Resolves serving handles and scores vectors. `inproc://<artifact digest>`
/// loads the artifact from the registry's content store (cached);
/// `http://host:port/path` posts to a remote runner. Scoring is stateless and
/// safe to call concurrently.
class ServingClient {
 public:
  explicit ServingClient(const ModelRegistry& registry,
                         std::chrono::milliseconds timeout = std::chrono::milliseconds(2000));

  /// Throws `Error(spec)` on dimension mismatch, `ServingError` when the
  /// remote runner is unreachable or fails, `Error(config)` on bad handles.
  ScoreResult score(const std::string& handle, const features::FeatureVector& vector) const;

  static constexpr int kRetryAfterSeconds = 5;

 private:
  std::shared_ptr<const ModelArtifact> artifact(const Digest& d) const;

  const ModelRegistry& registry_;
  std::chrono::milliseconds timeout_;
  mutable std::mutex cache_mutex_;
  mutable std::map<Digest, std::shared_ptr<const ModelArtifact>> cache_;
};

/// Remote runner for one artifact: POST /score with {entries: [[name,
/// version, value], ...]} answers {raw, probability}; 422 on dimension mismatch.
class RunnerServer {
 public:
  explicit RunnerServer(ModelArtifact artifact);
  ~RunnerServer();
  RunnerServer(const RunnerServer&) = delete;
  RunnerServer& operator=(const RunnerServer&) = delete;

  /// Binds (port 0 picks a free port) and serves on a background thread.
  int start(const std::string& host = "127.0.0.1", int port = 0);
  /// Blocks serving on the calling thread.
  void listen(const std::string& host, int port);
  void stop();
  int port() const { return port_; }
  std::string handle() const;

 private:
  void install_routes();

  ModelArtifact artifact_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  std::string host_;
  int port_ = 0;
};

}  // namespace lm::model
