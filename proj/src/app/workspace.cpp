// SPDX-License-Identifier: Apache-2.0
#include "lm/app/workspace.hpp"

#include <cstdlib>

#include "lm/core/canonical.hpp"
#include "lm/core/error.hpp"
#include "lm/core/jsonl.hpp"

namespace lm::monitoring {

void to_json(Json& j, const MonitorConfig& c) {
  j = Json{{"drift_window", c.drift_window},     {"min_drift_window", c.min_drift_window},
           {"accuracy_window", c.accuracy_window}, {"min_feedback", c.min_feedback},
           {"psi_warning", c.psi_warning},       {"psi_critical", c.psi_critical},
           {"auc_margin", c.auc_margin},         {"interval_seconds", c.interval.count()}};
}

void from_json(const Json& j, MonitorConfig& c) {
  const MonitorConfig d;
  c.drift_window = j.value("drift_window", d.drift_window);
  c.min_drift_window = j.value("min_drift_window", d.min_drift_window);
  c.accuracy_window = j.value("accuracy_window", d.accuracy_window);
  c.min_feedback = j.value("min_feedback", d.min_feedback);
  c.psi_warning = j.value("psi_warning", d.psi_warning);
  c.psi_critical = j.value("psi_critical", d.psi_critical);
  c.auc_margin = j.value("auc_margin", d.auc_margin);
  c.interval = std::chrono::seconds(j.value("interval_seconds", static_cast<long long>(d.interval.count())));
  if (c.psi_warning > c.psi_critical || c.min_drift_window == 0 || c.interval.count() <= 0) {
    throw Error(ErrorCode::config, "inconsistent monitor settings");
  }
}

}  // namespace lm::monitoring

namespace lm::app {

namespace fs = std::filesystem;

void to_json(Json& j, const AppConfig& c) {
  j = Json{{"data_root", c.data_root.string()},
           {"host", c.host},
           {"port", c.port},
           {"api_key", c.api_key},
           {"seed", c.seed},
           {"primary_metrics", c.primary_metrics},
           {"monitor", c.monitor}};
}

void from_json(const Json& j, AppConfig& c) {
  const AppConfig d;
  c.data_root = j.value("data_root", d.data_root.string());
  c.host = j.value("host", d.host);
  c.port = j.value("port", d.port);
  c.api_key = j.value("api_key", d.api_key);
  c.seed = j.value("seed", d.seed);
  c.primary_metrics = j.value("primary_metrics", d.primary_metrics);
  c.monitor = j.value("monitor", d.monitor);
}

AppConfig load_app_config(const std::optional<fs::path>& file) {
  AppConfig cfg;
  if (file) {
    if (!fs::exists(*file)) throw Error(ErrorCode::config, "config file " + file->string() + " does not exist");
    try {
      cfg = Json::parse(read_file(*file)).get<AppConfig>();
    } catch (const Json::exception& e) {
      throw Error(ErrorCode::config, "config file " + file->string() + ": " + e.what());
    }
  }
  if (const char* env = std::getenv("LM_DATA_ROOT"); env && *env) cfg.data_root = env;
  return cfg;
}

Workspace::Workspace(fs::path root) : root_(std::move(root)) {}

void Workspace::save_generator_config(const ingest::GeneratorConfig& cfg) const {
  fs::create_directories(dataset_dir());
  write_file_atomic(dataset_dir() / "generator.json", canonical_encode(cfg));
}

ingest::GeneratorConfig Workspace::generator_config() const {
  const auto file = dataset_dir() / "generator.json";
  if (!fs::exists(file)) throw Error(ErrorCode::not_found, "no generator.json in " + dataset_dir().string());
  return Json::parse(read_file(file)).get<ingest::GeneratorConfig>();
}

ingest::TimelineIndex Workspace::load_timelines() const {
  return ingest::TimelineIndex(ingest::load_timelines(dataset_dir()));
}

Cohort Workspace::load_cohort(const std::string& id) const { return ingest::load_cohort(cohorts_dir(), id); }

void Workspace::save_cohort(const Cohort& c) const {
  fs::create_directories(cohorts_dir());
  ingest::write_cohort(cohorts_dir(), c);
}

}  // namespace lm::app
