// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <condition_variable>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <thread>
#include <vector>

#include "lm/inference/records.hpp"
#include "lm/model/registry.hpp"
#include "lm/monitoring/profile.hpp"

namespace lm::monitoring {

enum class Severity { warning, critical };
enum class AlertKind { feature_drift, prediction_drift, accuracy_drop };

std::string_view to_string(Severity s) noexcept;
std::string_view to_string(AlertKind k) noexcept;

inline constexpr std::string_view kSuggestedAction = "review for retraining";

struct MonitorConfig {
  std::size_t drift_window = 500;
  std::size_t min_drift_window = 100;
  std::size_t accuracy_window = 500;
  std::size_t min_feedback = 30;
  double psi_warning = 0.1;
  double psi_critical = 0.2;
  double auc_margin = 0.05;
  std::chrono::seconds interval{60};
};

struct DriftFinding {
  std::string target;  // feature name or "score"
  double psi = 0;
  std::optional<Severity> severity;
};

struct AccuracyResult {
  double auc = 0;
  double accuracy = 0;
  std::size_t n = 0;
};

struct Alert {
  std::string alert_id;
  AlertKind kind = AlertKind::feature_drift;
  Severity severity = Severity::critical;
  std::string model_id;
  int model_version = 0;
  std::string metric_name;
  double value = 0;
  double threshold = 0;
  std::string window;
  std::string raised_at;
  std::string suggested_action{kSuggestedAction};
  bool resolved = false;

  std::string dedup_key() const;
};

/// PSI of every feature and of the score against the reference. Throws
/// `Error(profile)` when the window is below `min_window`.
std::vector<DriftFinding> detect_drift(const ReferenceProfile& profile,
                                       const std::vector<inference::PredictionRecord>& window,
                                       const MonitorConfig& cfg = {});

/// AUC and accuracy of logged probabilities against the latest feedback for
/// the newest `cfg.accuracy_window` feedback-joined predictions. Throws
/// `Error(insufficient_data)` below `min_feedback` or with one outcome.
AccuracyResult retrospective_accuracy(const std::vector<inference::PredictionRecord>& predictions,
                                      const std::map<std::string, inference::FeedbackRecord>& feedback,
                                      const MonitorConfig& cfg = {});

/// Append-only alert log (`logs/alerts.jsonl`). Resolution is a separate
/// appended event, so raised alerts are never rewritten.
class AlertLog {
 public:
  explicit AlertLog(std::optional<std::filesystem::path> file = std::nullopt);

  /// Appends unless an unresolved alert with the same key exists; returns
  /// the stored alert when appended.
  std::optional<Alert> raise(Alert a);
  void resolve(const std::string& alert_id);
  /// Resolves the open alert with this key, if any (the condition cleared).
  void resolve_key(const std::string& dedup_key);
  /// Alerts raised at or after `since` (ISO timestamp; empty = all).
  std::vector<Alert> list(const std::string& since = {}) const;
  bool has_unresolved(const std::string& dedup_key) const;

 private:
  void apply_locked(const Json& event);

  std::unique_ptr<JsonlAppender> out_;
  mutable std::shared_mutex mutex_;
  std::vector<Alert> alerts_;
};

struct ModelEvaluation {
  std::string model_id;
  int version = 0;
  std::vector<DriftFinding> drift;
  std::optional<AccuracyResult> accuracy;
  std::vector<std::string> notes;  // isolated per-model errors and signals
};

struct EvaluationReport {
  std::string evaluated_at;
  std::vector<Alert> new_alerts;
  std::vector<ModelEvaluation> models;
};

class Monitor {
 public:
  Monitor(const model::ModelRegistry& registry, const inference::PredictionLog& predictions,
          const inference::FeedbackLog& feedback, AlertLog& alerts, std::filesystem::path profiles_dir,
          MonitorConfig cfg = {});

  /// Drift and retrospective accuracy for every Production model. Errors
  /// are isolated per model. Serialized with itself.
  EvaluationReport evaluate_and_notify();
  /// The most recent evaluation, from any caller.
  std::optional<EvaluationReport> last_report() const;
  const MonitorConfig& config() const { return cfg_; }

 private:
  const model::ModelRegistry& registry_;
  const inference::PredictionLog& predictions_;
  const inference::FeedbackLog& feedback_;
  AlertLog& alerts_;
  std::filesystem::path profiles_dir_;
  MonitorConfig cfg_;
  std::mutex run_mutex_;
  mutable std::mutex last_mutex_;
  std::optional<EvaluationReport> last_;
};

/// Runs `evaluate_and_notify` every interval on a background thread.
class MonitorJob {
 public:
  MonitorJob(Monitor& monitor, std::chrono::milliseconds interval);
  ~MonitorJob();
  void stop();
  std::size_t runs() const;

 private:
  Monitor& monitor_;
  std::chrono::milliseconds interval_;
  mutable std::mutex mutex_;
  std::condition_variable cv_;
  bool stopping_ = false;
  std::size_t runs_ = 0;
  std::thread thread_;
};

void to_json(Json& j, const Alert& a);
void from_json(const Json& j, Alert& a);
void to_json(Json& j, const DriftFinding& f);
void to_json(Json& j, const EvaluationReport& r);

}  // namespace lm::monitoring
