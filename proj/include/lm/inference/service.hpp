// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <string>

#include "lm/inference/records.hpp"
#include "lm/model/serving.hpp"

namespace lm::inference {

/// Everything a metadata generator may look at for one prediction.
struct MetadataContext {
  const model::ModelSpec& spec;
  const model::ModelArtifact& artifact;
  const model::ProvenanceRecord& provenance;
  const features::FeatureVector& vector;
  const model::ScoreResult& score;
};

using MetadataGenerator = std::function<Json(const MetadataContext&)>;

/// Built-ins: "feature_importance_topk" (k=5 largest |coefficient·value|,
/// signed) and "provenance_summary".
std::map<std::string, MetadataGenerator> builtin_metadata_generators();

struct ServiceConfig {
  /// Accepted keys; empty disables the check.
  std::set<std::string> api_keys;
  /// Primary metric per task for best-model selection (default auc_test).
  std::map<std::string, std::string> primary_metrics;
};

/// The request flow: best model → spec → as-of vector → score → metadata →
/// log → response. Safe to call concurrently.
class InferenceService {
 public:
  InferenceService(features::FeatureRepository& features, model::ModelRegistry& registry,
                   const ingest::TimelineSource& timelines, PredictionLog& predictions, FeedbackLog& feedback,
                   ServiceConfig config = {});

  /// Throws `Error(auth)`, `Error(no_model)`, `FeatureMissError`,
  /// `ServingError`, `Error(spec)`.
  PredictionRecord predict(const PredictionRequest& req);
  /// Throws `Error(not_found)` when the request id was never logged.
  FeedbackReceipt submit_feedback(const FeedbackRecord& fb);
  PredictionRecord get_prediction(const std::string& request_id) const { return predictions_.get(request_id); }

  bool authorized(const std::string& api_key) const;
  void add_metadata_generator(const std::string& id, MetadataGenerator g);

  model::ModelRegistry& registry() { return registry_; }
  features::FeatureRepository& features() { return features_; }
  PredictionLog& predictions() { return predictions_; }
  FeedbackLog& feedback() { return feedback_; }

 private:
  struct ModelContext {
    std::shared_ptr<const model::ModelArtifact> artifact;
    std::shared_ptr<const model::ProvenanceRecord> provenance;
  };
  ModelContext context_for(const model::ModelSpec& spec);
  std::string next_request_id();

  features::FeatureRepository& features_;
  model::ModelRegistry& registry_;
  const ingest::TimelineSource& timelines_;
  PredictionLog& predictions_;
  FeedbackLog& feedback_;
  ServiceConfig config_;
  model::ServingClient serving_;
  std::map<std::string, MetadataGenerator> generators_;
  std::mutex context_mutex_;
  std::map<std::pair<std::string, int>, ModelContext> contexts_;
  std::string nonce_;
  std::atomic<std::uint64_t> seq_{0};
};

}  // namespace lm::inference
