// SPDX-License-Identifier: Apache-2.0
#include "lm/model/serving.hpp"

#include <httplib.h>

#include "lm/core/canonical.hpp"
#include "lm/core/error.hpp"

namespace lm::model {

namespace {

constexpr std::string_view kInproc = "inproc://";
constexpr std::string_view kHttp = "http://";

Json entries_body(const features::FeatureVector& v) { return Json{{"entries", v.entries}}; }

}  // namespace

ServingClient::ServingClient(const ModelRegistry& registry, std::chrono::milliseconds timeout)
    : registry_(registry), timeout_(timeout) {}

std::shared_ptr<const ModelArtifact> ServingClient::artifact(const Digest& d) const {
  {
    std::lock_guard lock(cache_mutex_);
    if (auto it = cache_.find(d); it != cache_.end()) return it->second;
  }
  auto loaded = std::make_shared<const ModelArtifact>(registry_.load_artifact(d));
  std::lock_guard lock(cache_mutex_);
  return cache_.emplace(d, std::move(loaded)).first->second;
}

ScoreResult ServingClient::score(const std::string& handle, const features::FeatureVector& vector) const {
  if (handle.rfind(kInproc, 0) == 0) {
    const auto a = artifact(Digest::from_hex(std::string_view(handle).substr(kInproc.size())));
    return score_linear(*a, vector.numeric_values());
  }
  if (handle.rfind(kHttp, 0) != 0) throw Error(ErrorCode::config, "unsupported serving handle '" + handle + "'");

  const auto slash = handle.find('/', kHttp.size());
  const std::string base = handle.substr(0, slash);
  const std::string path = slash == std::string::npos ? "/score" : handle.substr(slash);
  httplib::Client client(base);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout_);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout_ - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());

  auto res = client.Post(path, canonical_encode_json(entries_body(vector)), "application/json");
  if (!res) {
    throw ServingError("runner at " + base + " unreachable: " + httplib::to_string(res.error()), kRetryAfterSeconds);
  }
  if (res->status == 422) throw Error(ErrorCode::spec, "runner rejected vector: " + res->body);
  if (res->status != 200) {
    throw ServingError("runner at " + base + " answered " + std::to_string(res->status), kRetryAfterSeconds);
  }
  try {
    const auto j = Json::parse(res->body);
    return ScoreResult{j.at("raw").get<double>(), j.at("probability").get<double>()};
  } catch (const Json::exception& e) {
    throw ServingError(std::string("runner response unreadable: ") + e.what(), kRetryAfterSeconds);
  }
}

RunnerServer::RunnerServer(ModelArtifact artifact)
    : artifact_(std::move(artifact)), server_(std::make_unique<httplib::Server>()) {
  install_routes();
}

RunnerServer::~RunnerServer() { stop(); }

void RunnerServer::install_routes() {
  server_->Post("/score", [this](const httplib::Request& req, httplib::Response& res) {
    std::vector<double> values;
    try {
      const auto body = Json::parse(req.body);
      for (const auto& e : body.at("entries")) values.push_back(e.at(2).get<double>());
    } catch (const Json::exception& e) {
      res.status = 400;
      res.set_content(Json{{"error", e.what()}}.dump(), "application/json");
      return;
    }
    if (values.size() != artifact_.coefficients.size()) {
      res.status = 422;
      res.set_content(Json{{"error", "dimension mismatch"},
                           {"expected", artifact_.coefficients.size()},
                           {"got", values.size()}}
                          .dump(),
                      "application/json");
      return;
    }
    const auto r = score_linear(artifact_, values);
    res.set_content(canonical_encode_json(Json{{"raw", r.raw}, {"probability", r.probability}}), "application/json");
  });
}

int RunnerServer::start(const std::string& host, int port) {
  host_ = host;
  port_ = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
  if (port_ <= 0) throw Error(ErrorCode::io, "cannot bind runner on " + host + ":" + std::to_string(port));
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return port_;
}

void RunnerServer::listen(const std::string& host, int port) {
  host_ = host;
  port_ = port;
  if (!server_->listen(host, port)) throw Error(ErrorCode::io, "cannot listen on " + host + ":" + std::to_string(port));
}

void RunnerServer::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

std::string RunnerServer::handle() const { return "http://" + host_ + ":" + std::to_string(port_) + "/score"; }

}  // namespace lm::model
