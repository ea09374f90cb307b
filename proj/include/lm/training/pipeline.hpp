// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "lm/features/repository.hpp"
#include "lm/model/registry.hpp"
#include "lm/monitoring/profile.hpp"
#include "lm/training/logreg.hpp"

namespace lm::training {

inline constexpr std::string_view kAlgorithm = "logreg_sgd";

struct TrainConfig {
  std::string task_id;
  std::string model_id;  // defaults to task_id
  std::string cohort_id;
  /// Ordered features; version 0 means "latest at run time".
  std::vector<features::FeatureRef> feature_refs;
  std::string algorithm{kAlgorithm};
  Hyperparameters hyperparameters;
  double train_fraction = 0.8;
  double test_fraction = 0.2;
  bool calibrate = true;
  std::string primary_metric = "auc_test";
  std::vector<std::string> metadata_generator_ids{"feature_importance_topk", "provenance_summary"};
  unsigned threads = 0;

  /// Throws `Error(config)`.
  void validate() const;
  const std::string& effective_model_id() const { return model_id.empty() ? task_id : model_id; }
};

/// Reads the JSON config file. Features may be given as "name" (latest) or
/// ["name", version].
TrainConfig load_train_config(const std::filesystem::path& file);

struct EvalReport {
  double auc_train = 0;
  double auc_test = 0;
  double accuracy_test = 0;
  double brier_test = 0;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  double label_prevalence = 0;

  std::map<std::string, double> as_metrics() const;
};

struct PipelineEnv {
  features::FeatureRepository& features;
  model::ModelRegistry& registry;
  const ingest::TimelineIndex& timelines;
  std::function<Cohort(const std::string&)> load_cohort;
  /// Reference profiles are written here when set.
  std::optional<std::filesystem::path> profiles_dir;
};

struct PipelineResult {
  std::string run_id;
  model::ModelSpec spec;
  EvalReport report;
  model::ProvenanceRecord provenance;
  model::ModelArtifact artifact;
  std::vector<FeatureImportance> importance;
  monitoring::ReferenceProfile profile;
};

/// The feature rows the pipeline trains on: materialized, then read back
/// through the same as-of lookup serving uses.
std::vector<features::FeatureVector> training_rows(const features::FeatureRepository& repo,
                                                   const ingest::TimelineIndex& timelines,
                                                   const std::vector<features::FeatureRef>& refs,
                                                   const std::vector<CohortRow>& rows);

/// split → features → train → calibrate → evaluate → register. A registry
/// run record is created first and updated after every stage; a failure
/// marks it "failed:<stage>" and throws `PipelineError`.
PipelineResult run_pipeline(const PipelineEnv& env, const TrainConfig& cfg);

void to_json(Json& j, const TrainConfig& c);
void from_json(const Json& j, TrainConfig& c);
void to_json(Json& j, const EvalReport& r);

}  // namespace lm::training
