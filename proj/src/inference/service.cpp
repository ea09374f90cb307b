// SPDX-License-Identifier: Apache-2.0
#include "lm/inference/service.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

#include "lm/core/error.hpp"

namespace lm::inference {

std::map<std::string, MetadataGenerator> builtin_metadata_generators() {
  std::map<std::string, MetadataGenerator> out;
  out["feature_importance_topk"] = [](const MetadataContext& ctx) {
    constexpr std::size_t k = 5;
    const auto& coef = ctx.artifact.coefficients;
    const auto values = ctx.vector.numeric_values();
    std::vector<std::size_t> idx(values.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      return std::abs(coef[a] * values[a]) > std::abs(coef[b] * values[b]);
    });
    Json top = Json::array();
    for (std::size_t i = 0; i < std::min(k, idx.size()); ++i) {
      const auto& e = ctx.vector.entries[idx[i]];
      top.push_back(Json{{"feature", e.name},
                         {"version", e.version},
                         {"value", values[idx[i]]},
                         {"coefficient", coef[idx[i]]},
                         {"contribution", coef[idx[i]] * values[idx[i]]}});
    }
    return top;
  };
  out["provenance_summary"] = [](const MetadataContext& ctx) {
    return Json{{"provenance_ref", ctx.provenance.record_digest},
                {"algorithm", ctx.provenance.algorithm},
                {"metrics", ctx.provenance.metrics}};
  };
  return out;
}

InferenceService::InferenceService(features::FeatureRepository& features, model::ModelRegistry& registry,
                                   const ingest::TimelineSource& timelines, PredictionLog& predictions,
                                   FeedbackLog& feedback, ServiceConfig config)
    : features_(features),
      registry_(registry),
      timelines_(timelines),
      predictions_(predictions),
      feedback_(feedback),
      config_(std::move(config)),
      serving_(registry),
      generators_(builtin_metadata_generators()) {
  std::random_device rd;
  char buf[16];
  std::snprintf(buf, sizeof buf, "%08x", rd());
  nonce_ = buf;
}

bool InferenceService::authorized(const std::string& api_key) const {
  return config_.api_keys.empty() || config_.api_keys.count(api_key) > 0;
}

void InferenceService::add_metadata_generator(const std::string& id, MetadataGenerator g) {
  generators_[id] = std::move(g);
}

std::string InferenceService::next_request_id() {
  return "r-" + nonce_ + "-" + std::to_string(++seq_);
}

InferenceService::ModelContext InferenceService::context_for(const model::ModelSpec& spec) {
  const auto key = std::make_pair(spec.model_id, spec.version);
  {
    std::lock_guard lock(context_mutex_);
    if (auto it = contexts_.find(key); it != contexts_.end()) return it->second;
  }
  ModelContext ctx{std::make_shared<const model::ModelArtifact>(registry_.load_artifact(spec.artifact_digest)),
                   std::make_shared<const model::ProvenanceRecord>(registry_.get_provenance(spec.provenance_ref))};
  std::lock_guard lock(context_mutex_);
  return contexts_.emplace(key, std::move(ctx)).first->second;
}

PredictionRecord InferenceService::predict(const PredictionRequest& req) {
  if (!authorized(req.api_key)) throw Error(ErrorCode::auth, "invalid API key");
  const auto started = std::chrono::steady_clock::now();

  auto metric = config_.primary_metrics.find(req.task_id);
  const model::ModelSpec spec =
      registry_.get_best_model(req.task_id, metric == config_.primary_metrics.end() ? "auc_test" : metric->second);
  const auto vr = features_.get_vector_asof(timelines_, req.patient_id, spec.feature_refs, req.as_of_date,
                                            req.feature_policy);
  const auto score = serving_.score(spec.serving_handle, vr.vector);

  PredictionRecord rec;
  rec.request = req;
  rec.request.api_key.clear();
  rec.model_id = spec.model_id;
  rec.model_version = spec.version;
  rec.vector_digest = vr.vector.vector_digest;
  rec.raw_score = score.raw;
  rec.probability = score.probability;
  rec.decision = score.probability > spec.decision_threshold() ? 1 : 0;
  rec.features = vr.vector.entries;
  for (auto o : vr.origins) rec.origin_flags.emplace_back(features::to_string(o));

  if (!spec.metadata_generator_ids.empty()) {
    const auto ctx = context_for(spec);
    const MetadataContext mc{spec, *ctx.artifact, *ctx.provenance, vr.vector, score};
    for (const auto& id : spec.metadata_generator_ids) {
      auto g = generators_.find(id);
      rec.metadata[id] = g == generators_.end() ? Json{{"unavailable", "unknown metadata generator"}} : g->second(mc);
    }
  }

  rec.request_id = next_request_id();
  rec.served_at = utc_timestamp_now();
  rec.latency_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
  predictions_.append(rec);
  return rec;
}

FeedbackReceipt InferenceService::submit_feedback(const FeedbackRecord& fb) {
  if (!predictions_.find(fb.request_id)) throw Error(ErrorCode::not_found, "prediction '" + fb.request_id + "' not found");
  return feedback_.submit(fb);
}

}  // namespace lm::inference
