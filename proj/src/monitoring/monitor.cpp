// SPDX-License-Identifier: Apache-2.0
#include "lm/monitoring/monitor.hpp"

#include <cstdio>
#include <limits>

#include "lm/core/error.hpp"
#include "lm/training/metrics.hpp"

namespace lm::monitoring {

namespace fs = std::filesystem;

std::string_view to_string(Severity s) noexcept { return s == Severity::warning ? "warning" : "critical"; }

std::string_view to_string(AlertKind k) noexcept {
  switch (k) {
    case AlertKind::feature_drift: return "feature_drift";
    case AlertKind::prediction_drift: return "prediction_drift";
    case AlertKind::accuracy_drop: return "accuracy_drop";
  }
  return "feature_drift";
}

namespace {

AlertKind parse_kind(std::string_view s) {
  if (s == "feature_drift") return AlertKind::feature_drift;
  if (s == "prediction_drift") return AlertKind::prediction_drift;
  if (s == "accuracy_drop") return AlertKind::accuracy_drop;
  throw Error(ErrorCode::corruption, "unknown alert kind '" + std::string(s) + "'");
}

double numeric_or_zero(const inference::PredictionRecord& r, const std::string& name, int version) {
  for (const auto& e : r.features) {
    if (e.name != name || e.version != version) continue;
    const double* v = std::get_if<double>(&e.value);
    return v ? *v : 0.0;
  }
  return 0.0;  // same imputation as training
}

}  // namespace

std::string Alert::dedup_key() const {
  return std::string(to_string(kind)) + "|" + model_id + "@v" + std::to_string(model_version) + "|" + metric_name;
}

std::vector<DriftFinding> detect_drift(const ReferenceProfile& profile,
                                       const std::vector<inference::PredictionRecord>& window,
                                       const MonitorConfig& cfg) {
  if (window.size() < cfg.min_drift_window) {
    throw Error(ErrorCode::profile, "drift window has " + std::to_string(window.size()) + " records, need " +
                                        std::to_string(cfg.min_drift_window));
  }
  auto classify = [&](double psi_value) -> std::optional<Severity> {
    if (psi_value >= cfg.psi_critical) return Severity::critical;
    if (psi_value >= cfg.psi_warning) return Severity::warning;
    return std::nullopt;
  };
  std::vector<DriftFinding> out;
  std::vector<double> values(window.size());
  for (const auto& f : profile.features) {
    for (std::size_t i = 0; i < window.size(); ++i) values[i] = numeric_or_zero(window[i], f.name, f.version);
    const double v = psi(f.histogram.proportions, f.histogram.proportions_of(values));
    out.push_back({f.name, v, classify(v)});
  }
  for (std::size_t i = 0; i < window.size(); ++i) values[i] = window[i].probability;
  const double v = psi(profile.score.proportions, profile.score.proportions_of(values));
  out.push_back({"score", v, classify(v)});
  return out;
}

AccuracyResult retrospective_accuracy(const std::vector<inference::PredictionRecord>& predictions,
                                      const std::map<std::string, inference::FeedbackRecord>& feedback,
                                      const MonitorConfig& cfg) {
  std::vector<double> probs;
  std::vector<int> outcomes;
  std::size_t correct = 0;
  for (auto it = predictions.rbegin(); it != predictions.rend() && probs.size() < cfg.accuracy_window; ++it) {
    auto fb = feedback.find(it->request_id);
    if (fb == feedback.end()) continue;
    probs.push_back(it->probability);
    outcomes.push_back(fb->second.observed_outcome);
    correct += it->decision == fb->second.observed_outcome;
  }
  if (probs.size() < cfg.min_feedback) {
    throw Error(ErrorCode::insufficient_data, "only " + std::to_string(probs.size()) +
                                                  " feedback-joined predictions, need " +
                                                  std::to_string(cfg.min_feedback));
  }
  const bool both = std::count(outcomes.begin(), outcomes.end(), 1) > 0 &&
                    std::count(outcomes.begin(), outcomes.end(), 0) > 0;
  if (!both) throw Error(ErrorCode::insufficient_data, "feedback outcomes contain a single class");
  return {training::auc(probs, outcomes), static_cast<double>(correct) / static_cast<double>(probs.size()),
          probs.size()};
}

AlertLog::AlertLog(std::optional<fs::path> file) {
  if (file) {
    read_jsonl(*file, [&](const Json& j) { apply_locked(j); });
    fs::create_directories(file->parent_path());
    out_ = std::make_unique<JsonlAppender>(*file);
  }
}

void AlertLog::apply_locked(const Json& event) {
  const auto& kind = event.at("kind").get_ref<const std::string&>();
  if (kind == "alert") {
    alerts_.push_back(event.at("alert").get<Alert>());
  } else if (kind == "resolve") {
    const auto id = event.at("alert_id").get<std::string>();
    for (auto& a : alerts_)
      if (a.alert_id == id) a.resolved = true;
  } else {
    throw Error(ErrorCode::corruption, "unknown alert log event '" + kind + "'");
  }
}

bool AlertLog::has_unresolved(const std::string& key) const {
  std::shared_lock lock(mutex_);
  for (const auto& a : alerts_)
    if (!a.resolved && a.dedup_key() == key) return true;
  return false;
}

std::optional<Alert> AlertLog::raise(Alert a) {
  std::unique_lock lock(mutex_);
  const auto key = a.dedup_key();
  for (const auto& existing : alerts_)
    if (!existing.resolved && existing.dedup_key() == key) return std::nullopt;
  char id[32];
  std::snprintf(id, sizeof id, "a-%06zu", alerts_.size() + 1);
  a.alert_id = id;
  a.resolved = false;
  if (a.raised_at.empty()) a.raised_at = utc_timestamp_now();
  const Json event{{"kind", "alert"}, {"alert", a}};
  if (out_) out_->append(event);
  apply_locked(event);
  return a;
}

void AlertLog::resolve(const std::string& alert_id) {
  std::unique_lock lock(mutex_);
  bool found = false;
  for (const auto& a : alerts_) found = found || a.alert_id == alert_id;
  if (!found) throw Error(ErrorCode::not_found, "alert '" + alert_id + "' not found");
  const Json event{{"kind", "resolve"}, {"alert_id", alert_id}};
  if (out_) out_->append(event);
  apply_locked(event);
}

void AlertLog::resolve_key(const std::string& key) {
  std::string id;
  {
    std::shared_lock lock(mutex_);
    for (const auto& a : alerts_)
      if (!a.resolved && a.dedup_key() == key) id = a.alert_id;
  }
  if (!id.empty()) resolve(id);
}

std::vector<Alert> AlertLog::list(const std::string& since) const {
  std::shared_lock lock(mutex_);
  std::vector<Alert> out;
  for (const auto& a : alerts_)
    if (since.empty() || a.raised_at >= since) out.push_back(a);
  return out;
}

Monitor::Monitor(const model::ModelRegistry& registry, const inference::PredictionLog& predictions,
                 const inference::FeedbackLog& feedback, AlertLog& alerts, fs::path profiles_dir, MonitorConfig cfg)
    : registry_(registry),
      predictions_(predictions),
      feedback_(feedback),
      alerts_(alerts),
      profiles_dir_(std::move(profiles_dir)),
      cfg_(cfg) {}

EvaluationReport Monitor::evaluate_and_notify() {
  std::lock_guard run_lock(run_mutex_);
  EvaluationReport report;
  report.evaluated_at = utc_timestamp_now();
  const auto feedback = feedback_.latest_all();
  auto emit = [&](Alert a) {
    if (auto stored = alerts_.raise(std::move(a))) report.new_alerts.push_back(*stored);
  };

  for (const auto& spec : registry_.list_models()) {
    if (spec.stage != model::Stage::Production) continue;
    ModelEvaluation ev{spec.model_id, spec.version, {}, std::nullopt, {}};
    const std::string ref = spec.model_id + "@v" + std::to_string(spec.version);

    try {
      const auto profile = load_profile(profiles_dir_, spec.model_id, spec.version);
      const auto window = predictions_.window(spec.model_id, spec.version, cfg_.drift_window);
      ev.drift = detect_drift(profile, window, cfg_);
      for (const auto& f : ev.drift) {
        Alert a;
        a.kind = f.target == "score" ? AlertKind::prediction_drift : AlertKind::feature_drift;
        a.model_id = spec.model_id;
        a.model_version = spec.version;
        a.metric_name = f.target;
        if (f.severity == Severity::critical) {
          a.value = f.psi;
          a.threshold = cfg_.psi_critical;
          a.window = "last " + std::to_string(window.size()) + " predictions of " + ref;
          emit(std::move(a));
        } else {
          alerts_.resolve_key(a.dedup_key());
        }
      }
    } catch (const Error& e) {
      ev.notes.push_back(std::string("drift: ") + e.what());
    }

    try {
      const auto all = predictions_.window(spec.model_id, spec.version, std::numeric_limits<std::size_t>::max());
      const auto acc = retrospective_accuracy(all, feedback, cfg_);
      ev.accuracy = acc;
      auto registered = spec.metrics.find("auc_test");
      if (registered != spec.metrics.end()) {
        Alert a;
        a.kind = AlertKind::accuracy_drop;
        a.model_id = spec.model_id;
        a.model_version = spec.version;
        a.metric_name = "auc";
        const double threshold = registered->second - cfg_.auc_margin;
        if (acc.auc < threshold) {
          a.value = acc.auc;
          a.threshold = threshold;
          a.window = "last " + std::to_string(acc.n) + " feedback-joined predictions of " + ref;
          emit(std::move(a));
        } else {
          alerts_.resolve_key(a.dedup_key());
        }
      }
    } catch (const Error& e) {
      ev.notes.push_back(std::string("accuracy: ") + e.what());
    }
    report.models.push_back(std::move(ev));
  }
  {
    std::lock_guard lock(last_mutex_);
    last_ = report;
  }
  return report;
}

std::optional<EvaluationReport> Monitor::last_report() const {
  std::lock_guard lock(last_mutex_);
  return last_;
}

MonitorJob::MonitorJob(Monitor& monitor, std::chrono::milliseconds interval) : monitor_(monitor), interval_(interval) {
  thread_ = std::thread([this] {
    std::unique_lock lock(mutex_);
    while (!cv_.wait_for(lock, interval_, [this] { return stopping_; })) {
      lock.unlock();
      try {
        monitor_.evaluate_and_notify();
      } catch (const std::exception&) {
        // The next tick retries; a failing run must not stop the job.
      }
      lock.lock();
      ++runs_;
    }
  });
}

MonitorJob::~MonitorJob() { stop(); }

void MonitorJob::stop() {
  {
    std::lock_guard lock(mutex_);
    stopping_ = true;
  }
  cv_.notify_all();
  if (thread_.joinable()) thread_.join();
}

std::size_t MonitorJob::runs() const {
  std::lock_guard lock(mutex_);
  return runs_;
}

void to_json(Json& j, const Alert& a) {
  j = Json{{"alert_id", a.alert_id},
           {"kind", to_string(a.kind)},
           {"severity", to_string(a.severity)},
           {"model_id", a.model_id},
           {"model_version", a.model_version},
           {"metric_name", a.metric_name},
           {"value", a.value},
           {"threshold", a.threshold},
           {"window", a.window},
           {"raised_at", a.raised_at},
           {"suggested_action", a.suggested_action},
           {"resolved", a.resolved}};
}

void from_json(const Json& j, Alert& a) {
  a.alert_id = j.at("alert_id").get<std::string>();
  a.kind = parse_kind(j.at("kind").get<std::string>());
  a.severity = j.at("severity").get<std::string>() == "warning" ? Severity::warning : Severity::critical;
  a.model_id = j.at("model_id").get<std::string>();
  a.model_version = j.at("model_version").get<int>();
  a.metric_name = j.at("metric_name").get<std::string>();
  a.value = j.at("value").get<double>();
  a.threshold = j.at("threshold").get<double>();
  a.window = j.value("window", std::string{});
  a.raised_at = j.value("raised_at", std::string{});
  a.suggested_action = j.value("suggested_action", std::string(kSuggestedAction));
  a.resolved = j.value("resolved", false);
}

void to_json(Json& j, const DriftFinding& f) {
  j = Json{{"target", f.target}, {"psi", f.psi}};
  j["severity"] = f.severity ? Json(to_string(*f.severity)) : Json(nullptr);
}

void to_json(Json& j, const EvaluationReport& r) {
  Json models = Json::array();
  for (const auto& m : r.models) {
    Json entry{{"model_id", m.model_id}, {"version", m.version}, {"drift", m.drift}, {"notes", m.notes}};
    entry["accuracy"] = m.accuracy ? Json{{"auc", m.accuracy->auc}, {"accuracy", m.accuracy->accuracy}, {"n", m.accuracy->n}}
                                   : Json(nullptr);
    models.push_back(std::move(entry));
  }
  j = Json{{"evaluated_at", r.evaluated_at}, {"new_alerts", r.new_alerts}, {"models", models}};
}

}  // namespace lm::monitoring
