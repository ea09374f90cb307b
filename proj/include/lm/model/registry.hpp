// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "lm/core/jsonl.hpp"
#include "lm/model/content_store.hpp"
#include "lm/model/model.hpp"

namespace lm::model {

struct TransitionEvent {
  std::string model_id;
  int version = 0;
  Stage from = Stage::None;
  Stage to = Stage::None;
  std::string actor;
  std::string reason;
  std::string at;
};

/// Registry-side record of a training run, created before any work starts
/// and updated after each stage. A crashed run leaves status "failed:<stage>".
struct RunRecord {
  std::string run_id;
  std::string task_id;
  std::string model_id;
  std::string status;  // "running:<stage>", "failed:<stage>", "registered"
  std::string detail;
  std::optional<int> version;
  std::string updated_at;
};

struct Lineage {
  ProvenanceRecord record;
  /// Cohort content (target spec and rows) resolved from the content store.
  Json train_cohort;
  Json test_cohort;
  /// Definitions resolved from the feature catalog when one is supplied.
  std::vector<features::FeatureDefinition> feature_definitions;
};

/// Model registry. State is the fold of an append-only event log at
/// `<data_root>/registry.jsonl`; artifacts and provenance live in the
/// content store under `<data_root>/artifacts`. Reads share a lock, writes
/// are globally serialized.
class ModelRegistry {
 public:
  explicit ModelRegistry(std::optional<std::filesystem::path> data_root = std::nullopt);

  ContentStore& content() { return *content_; }
  const ContentStore& content() const { return *content_; }

  /// Stores the provenance record (if new) and returns its digest.
  Digest store_provenance(ProvenanceRecord prov);
  /// Stores the cohort content so lineage can resolve it; returns its digest.
  Digest store_cohort(const Cohort& cohort);
  /// Stores the artifact and returns it with `artifact_digest` set.
  ModelArtifact store_artifact(ModelArtifact artifact);

  /// Registers a new version (stage None). Identical (artifact, provenance)
  /// for the same model_id returns the existing version unchanged.
  ModelSpec register_model(ModelSpec draft, ModelArtifact artifact, ProvenanceRecord prov);
  /// Same, with provenance already stored; a dangling ref throws `Error(integrity)`.
  ModelSpec register_model(ModelSpec draft, ModelArtifact artifact, const Digest& provenance_ref);

  ModelSpec transition_stage(const std::string& model_id, int version, Stage to, const std::string& actor = "cli");

  /// Highest `primary_metric` among Production specs of the task; ties go to
  /// the latest registration. Throws `Error(no_model)`.
  ModelSpec get_best_model(const std::string& task_id, const std::string& primary_metric = "auc_test") const;

  ModelSpec get_model(const std::string& model_id, int version) const;
  /// Ordered by (model_id, version); empty task_id lists everything.
  std::vector<ModelSpec> list_models(const std::string& task_id = {}) const;
  std::vector<TransitionEvent> audit_log() const;

  ModelArtifact load_artifact(const Digest& artifact_digest) const;
  /// Throws `Error(not_found)` or `Error(corruption)` when the stored bytes no
  /// longer produce `digest`.
  ProvenanceRecord get_provenance(const Digest& digest) const;
  Lineage get_lineage(const Digest& provenance_ref, const features::FeatureCatalog* catalog = nullptr) const;

  std::string begin_run(const std::string& task_id, const std::string& model_id);
  void update_run(const std::string& run_id, const std::string& status, const std::string& detail = {},
                  std::optional<int> version = std::nullopt);
  RunRecord get_run(const std::string& run_id) const;
  std::vector<RunRecord> list_runs() const;

 private:
  void apply_locked(const Json& event);
  void append_locked(const Json& event);
  ModelSpec* find_locked(const std::string& model_id, int version);
  const ModelSpec* find_locked(const std::string& model_id, int version) const;

  std::unique_ptr<ContentStore> content_;
  std::unique_ptr<JsonlAppender> log_;
  mutable std::shared_mutex mutex_;
  std::map<std::pair<std::string, int>, ModelSpec> specs_;
  std::vector<TransitionEvent> audit_;
  std::map<std::string, RunRecord> runs_;
  std::uint64_t seq_ = 0;
  std::uint64_t run_seq_ = 0;
};

void to_json(Json& j, const TransitionEvent& e);
void from_json(const Json& j, TransitionEvent& e);
void to_json(Json& j, const RunRecord& r);
void from_json(const Json& j, RunRecord& r);
void to_json(Json& j, const Lineage& l);

}  // namespace lm::model
