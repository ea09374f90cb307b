// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "lm/ingest/dataset.hpp"
#include "lm/ingest/synthetic.hpp"
#include "lm/monitoring/monitor.hpp"

namespace lm::app {

/// Operator configuration (`--config <file>`, JSON). LM_DATA_ROOT overrides
/// `data_root`.
struct AppConfig {
  std::filesystem::path data_root = "lm-data";
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string api_key;  // sent by clients; when set, `serve` requires it
  std::uint64_t seed = 42;
  std::map<std::string, std::string> primary_metrics;
  monitoring::MonitorConfig monitor;
};

/// Missing file → defaults. Throws `Error(config)` on unreadable JSON.
AppConfig load_app_config(const std::optional<std::filesystem::path>& file);

/// Layout of a data root:
///   dataset/            patients.jsonl, events-NNNN.jsonl, generator.json
///   cohorts/            cohort-<id>.jsonl + .digest
///   catalog.jsonl, features/   feature repository
///   registry.jsonl, artifacts/ model registry and content store
///   profiles/           reference profiles per model version
///   logs/               predictions, feedback, alerts
class Workspace {
 public:
  explicit Workspace(std::filesystem::path root);

  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path dataset_dir() const { return root_ / "dataset"; }
  std::filesystem::path cohorts_dir() const { return root_ / "cohorts"; }
  std::filesystem::path profiles_dir() const { return root_ / "profiles"; }
  std::filesystem::path predictions_log() const { return root_ / "logs" / "predictions.jsonl"; }
  std::filesystem::path feedback_log() const { return root_ / "logs" / "feedback.jsonl"; }
  std::filesystem::path alerts_log() const { return root_ / "logs" / "alerts.jsonl"; }

  void save_generator_config(const ingest::GeneratorConfig& cfg) const;
  /// Throws `Error(not_found)` when the dataset was not generated here.
  ingest::GeneratorConfig generator_config() const;

  ingest::TimelineIndex load_timelines() const;
  Cohort load_cohort(const std::string& id) const;
  void save_cohort(const Cohort& c) const;

 private:
  std::filesystem::path root_;
};

void to_json(Json& j, const AppConfig& c);
void from_json(const Json& j, AppConfig& c);

}  // namespace lm::app

namespace lm::monitoring {
void to_json(Json& j, const MonitorConfig& c);
void from_json(const Json& j, MonitorConfig& c);
}  // namespace lm::monitoring
