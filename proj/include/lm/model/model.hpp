// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lm/core/digest.hpp"
#include "lm/core/types.hpp"
#include "lm/features/catalog.hpp"

namespace lm::model {

using features::FeatureRef;

enum class Stage { None, Staging, Production, Archived };

std::string_view to_string(Stage s) noexcept;
/// Throws `Error(config)`.
Stage parse_stage(std::string_view s);
bool transition_allowed(Stage from, Stage to) noexcept;

inline constexpr std::string_view kDecisionThreshold = "decision";

struct ModelSpec {
  std::string task_id;
  std::string model_id;
  int version = 0;
  Stage stage = Stage::None;
  std::string serving_handle;
  std::vector<FeatureRef> feature_refs;
  std::vector<std::string> metadata_generator_ids;
  Digest provenance_ref;
  Digest artifact_digest;
  std::map<std::string, double> metrics;
  std::map<std::string, double> thresholds;
  // Assigned by the registry.
  std::uint64_t registered_seq = 0;
  std::string registered_at;

  double decision_threshold() const;
};

struct ProvenanceFeature {
  std::string name;
  int version = 0;
  std::string generator_id;
  Digest params_digest;

  bool operator==(const ProvenanceFeature&) const = default;
};

struct ProvenanceRecord {
  Digest record_digest;
  Digest train_cohort_digest;
  Digest test_cohort_digest;
  std::vector<ProvenanceFeature> feature_definitions;
  std::string algorithm;
  Json hyperparameters = Json::object();
  std::map<std::string, double> metrics;
  std::string code_revision;
  std::string created_at;

  /// Covers every field except `record_digest` and `created_at`, so two runs
  /// over the same inputs share an identity.
  Digest compute_digest() const;
  Json identity_content() const;
};

struct PlattCalibration {
  double a = 1.0;
  double b = 0.0;

  bool operator==(const PlattCalibration&) const = default;
};

inline constexpr std::string_view kLinearFormat = "linear-v1";

struct ModelArtifact {
  Digest artifact_digest;
  std::string format{kLinearFormat};
  double intercept = 0.0;
  std::vector<double> coefficients;
  std::string link = "logit";
  std::optional<PlattCalibration> calibration;

  /// Everything except `artifact_digest`.
  Json content() const;
  Digest compute_digest() const;
};

struct ScoreResult {
  double raw = 0.0;
  double probability = 0.0;
};

double sigmoid(double x) noexcept;
/// linear-v1 evaluation: raw = intercept + Σ coef·value, probability =
/// σ(raw) or σ(a·raw + b) with calibration. Throws `Error(spec)` on a
/// dimension mismatch.
ScoreResult score_linear(const ModelArtifact& artifact, const std::vector<double>& values);

void to_json(Json& j, const ModelSpec& s);
void from_json(const Json& j, ModelSpec& s);
void to_json(Json& j, const ProvenanceFeature& f);
void from_json(const Json& j, ProvenanceFeature& f);
void to_json(Json& j, const ProvenanceRecord& r);
void from_json(const Json& j, ProvenanceRecord& r);
void to_json(Json& j, const ModelArtifact& a);
void from_json(const Json& j, ModelArtifact& a);

}  // namespace lm::model
