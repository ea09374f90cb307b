// SPDX-License-Identifier: Apache-2.0
// Shared fixture: synthetic timelines, the standard feature set, a fixed-date
// cohort on the planted reference date, and helpers to train and promote.
#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "lm/core/error.hpp"
#include "lm/features/standard_set.hpp"
#include "lm/inference/service.hpp"
#include "lm/ingest/cohort.hpp"
#include "lm/ingest/synthetic.hpp"
#include "lm/training/pipeline.hpp"

namespace lm::testing {

namespace fs = std::filesystem;

inline constexpr const char* kTask = "unplanned_admission_90d";

struct World {
  ingest::GeneratorConfig gen;
  ingest::TimelineIndex timelines;
  features::FeatureRepository features;
  model::ModelRegistry registry;
  Cohort cohort;

  explicit World(int patients = 600, double rate = 0.3, std::uint64_t seed = 42) {
    gen.n_patients = patients;
    gen.target_injection_rate = rate;
    gen.seed = seed;
    timelines = ingest::TimelineIndex(ingest::generate_synthetic(gen));
    for (const auto& d : features::standard_feature_set()) features.register_feature(d);
    TargetSpec target{EventType::admission, {std::string(ingest::kUnplannedAdmissionCode)}, 90};
    cohort = ingest::build_cohort(timelines.all(), target, ingest::FixedDate{index_date()}, "demo");
  }

  Date index_date() const { return ingest::planted_reference_date(gen); }

  training::PipelineEnv env(std::optional<fs::path> profiles = std::nullopt) {
    return training::PipelineEnv{features, registry, timelines,
                                 [this](const std::string& id) {
                                   if (id != cohort.cohort_id) throw Error(ErrorCode::not_found, "no cohort " + id);
                                   return cohort;
                                 },
                                 profiles};
  }

  training::TrainConfig config() const {
    training::TrainConfig cfg;
    cfg.task_id = kTask;
    cfg.cohort_id = "demo";
    for (const auto& n : features::standard_numeric_feature_names()) cfg.feature_refs.push_back({n, 0});
    return cfg;
  }

  /// Trains with the default config and promotes the version to Production.
  training::PipelineResult train_and_promote(std::optional<fs::path> profiles = std::nullopt) {
    auto r = training::run_pipeline(env(std::move(profiles)), config());
    registry.transition_stage(r.spec.model_id, r.spec.version, model::Stage::Staging, "test");
    r.spec = registry.transition_stage(r.spec.model_id, r.spec.version, model::Stage::Production, "test");
    return r;
  }
};

/// Prediction and feedback logs plus a service over a World.
struct Serving {
  inference::PredictionLog predictions;
  inference::FeedbackLog feedback;
  inference::InferenceService service;

  explicit Serving(World& w, inference::ServiceConfig cfg = {})
      : service(w.features, w.registry, w.timelines, predictions, feedback, std::move(cfg)) {}
};

}  // namespace lm::testing
