// SPDX-License-Identifier: Apache-2.0
#include "lm/inference/http_api.hpp"

#include <httplib.h>

#include "lm/core/error.hpp"

namespace lm::inference {

int http_status_for(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::auth: return 401;
    case ErrorCode::not_found:
    case ErrorCode::no_model: return 404;
    case ErrorCode::feature_miss:
    case ErrorCode::transition:
    case ErrorCode::registration: return 409;
    case ErrorCode::serving: return 502;
    case ErrorCode::insufficient_data:
    case ErrorCode::profile: return 422;
    case ErrorCode::config:
    case ErrorCode::spec:
    case ErrorCode::encoding: return 400;
    default: return 500;
  }
}

Json error_body(const Error& e) {
  Json j{{"error", to_string(e.code())}, {"message", e.what()}};
  if (const auto* miss = dynamic_cast<const FeatureMissError*>(&e)) j["missing"] = miss->missing();
  return j;
}

namespace {

void send(httplib::Response& res, int status, const Json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json; charset=utf-8");
}

// Runs a handler and maps failures onto status codes.
template <class F>
void guarded(httplib::Response& res, F&& f) {
  try {
    f();
  } catch (const ServingError& e) {
    res.set_header("Retry-After", std::to_string(e.retry_after_seconds()));
    send(res, 502, error_body(e));
  } catch (const Error& e) {
    send(res, http_status_for(e.code()), error_body(e));
  } catch (const Json::exception& e) {
    send(res, 400, Json{{"error", "bad_request"}, {"message", e.what()}});
  } catch (const std::exception& e) {
    send(res, 500, Json{{"error", "internal"}, {"message", e.what()}});
  }
}

Json prediction_view(const PredictionRecord& r) {
  Json j = r;
  j.erase("features");
  return j;
}

}  // namespace

ApiServer::ApiServer(InferenceService& service, monitoring::AlertLog& alerts, monitoring::Monitor* monitor)
    : service_(service), alerts_(alerts), monitor_(monitor), server_(std::make_unique<httplib::Server>()) {
  install_routes();
}

ApiServer::~ApiServer() { stop(); }

void ApiServer::install_routes() {
  auto require_key = [this](const httplib::Request& req) {
    if (!service_.authorized(req.get_header_value("X-API-Key"))) throw Error(ErrorCode::auth, "missing or invalid X-API-Key");
  };

  server_->Get("/v1/health", [](const httplib::Request&, httplib::Response& res) {
    send(res, 200, Json{{"status", "ok"}});
  });

  server_->Post("/v1/predict", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      auto pr = Json::parse(req.body).get<PredictionRequest>();
      pr.api_key = req.get_header_value("X-API-Key");
      send(res, 200, prediction_view(service_.predict(pr)));
    });
  });

  server_->Post("/v1/feedback", [this, require_key](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      require_key(req);
      const auto receipt = service_.submit_feedback(Json::parse(req.body).get<FeedbackRecord>());
      send(res, receipt.created ? 201 : 200, receipt);
    });
  });

  server_->Get(R"(/v1/predictions/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { send(res, 200, service_.get_prediction(req.matches[1])); });
  });

  server_->Get("/v1/models", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      send(res, 200, Json{{"models", service_.registry().list_models(req.get_param_value("task_id"))}});
    });
  });

  server_->Get(R"(/v1/models/([^/]+)/versions/(\d+))", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const std::string id = req.matches[1];
      const int version = std::stoi(req.matches[2]);
      const auto spec = service_.registry().get_model(id, version);
      Json events = Json::array();
      for (const auto& e : service_.registry().audit_log())
        if (e.model_id == id && e.version == version) events.push_back(e);
      send(res, 200, Json{{"spec", spec}, {"transitions", events}});
    });
  });

  server_->Post(R"(/v1/models/([^/]+)/versions/(\d+)/stage)",
                [this, require_key](const httplib::Request& req, httplib::Response& res) {
                  guarded(res, [&] {
                    require_key(req);
                    const auto body = Json::parse(req.body);
                    const auto to = model::parse_stage(body.at("to").get<std::string>());
                    const auto spec = service_.registry().transition_stage(req.matches[1], std::stoi(req.matches[2]), to,
                                                                           body.value("actor", std::string("api")));
                    send(res, 200, spec);
                  });
                });

  server_->Get(R"(/v1/provenance/([0-9a-fA-F]+))", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto d = Digest::from_hex(std::string(req.matches[1]));
      send(res, 200, service_.registry().get_lineage(d, &service_.features().catalog()));
    });
  });

  server_->Get("/v1/monitor/alerts", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { send(res, 200, Json{{"alerts", alerts_.list(req.get_param_value("since"))}}); });
  });

  server_->Get("/v1/monitor/report", [this](const httplib::Request&, httplib::Response& res) {
    guarded(res, [&] {
      if (!monitor_) throw Error(ErrorCode::not_found, "monitor not configured");
      auto last = monitor_->last_report();
      if (!last) throw Error(ErrorCode::not_found, "no monitor run yet");
      send(res, 200, *last);
    });
  });

  server_->Post("/v1/monitor/run", [this, require_key](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      require_key(req);
      if (!monitor_) throw Error(ErrorCode::not_found, "monitor not configured");
      send(res, 200, monitor_->evaluate_and_notify());
    });
  });
}

int ApiServer::start(const std::string& host, int port) {
  port_ = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
  if (port_ <= 0) throw Error(ErrorCode::io, "cannot bind API on " + host + ":" + std::to_string(port));
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return port_;
}

void ApiServer::listen(const std::string& host, int port) {
  port_ = port;
  if (!server_->listen(host, port)) throw Error(ErrorCode::io, "cannot listen on " + host + ":" + std::to_string(port));
}

void ApiServer::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace lm::inference
