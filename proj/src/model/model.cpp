// SPDX-License-Identifier: Apache-2.0
#include "lm/model/model.hpp"

#include <cmath>

#include "lm/core/canonical.hpp"
#include "lm/core/error.hpp"

namespace lm::model {

std::string_view to_string(Stage s) noexcept {
  switch (s) {
    case Stage::None: return "None";
    case Stage::Staging: return "Staging";
    case Stage::Production: return "Production";
    case Stage::Archived: return "Archived";
  }
  return "None";
}

Stage parse_stage(std::string_view s) {
  if (s == "None") return Stage::None;
  if (s == "Staging") return Stage::Staging;
  if (s == "Production") return Stage::Production;
  if (s == "Archived") return Stage::Archived;
  throw Error(ErrorCode::config, "unknown stage '" + std::string(s) + "'");
}

bool transition_allowed(Stage from, Stage to) noexcept {
  return (from == Stage::None && to == Stage::Staging) || (from == Stage::Staging && to == Stage::Production) ||
         (from == Stage::Production && to == Stage::Archived) || (from == Stage::Staging && to == Stage::Archived);
}

double ModelSpec::decision_threshold() const {
  auto it = thresholds.find(std::string(kDecisionThreshold));
  return it == thresholds.end() ? 0.5 : it->second;
}

Json ProvenanceRecord::identity_content() const {
  return Json{{"train_cohort_digest", train_cohort_digest},
              {"test_cohort_digest", test_cohort_digest},
              {"feature_definitions", feature_definitions},
              {"algorithm", algorithm},
              {"hyperparameters", hyperparameters},
              {"metrics", metrics},
              {"code_revision", code_revision}};
}

Digest ProvenanceRecord::compute_digest() const { return digest(canonical_encode_json(identity_content())); }

Json ModelArtifact::content() const {
  Json j{{"format", format}, {"intercept", intercept}, {"coefficients", coefficients}, {"link", link}};
  if (calibration) j["calibration"] = Json{{"a", calibration->a}, {"b", calibration->b}};
  return j;
}

Digest ModelArtifact::compute_digest() const { return digest(canonical_encode_json(content())); }

double sigmoid(double x) noexcept {
  // Split by sign so large |x| never overflows exp.
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

ScoreResult score_linear(const ModelArtifact& artifact, const std::vector<double>& values) {
  if (artifact.format != kLinearFormat) throw Error(ErrorCode::spec, "unsupported artifact format '" + artifact.format + "'");
  if (values.size() != artifact.coefficients.size()) {
    throw Error(ErrorCode::spec, "vector has " + std::to_string(values.size()) + " values, model expects " +
                                     std::to_string(artifact.coefficients.size()));
  }
  ScoreResult r;
  r.raw = artifact.intercept;
  for (std::size_t i = 0; i < values.size(); ++i) r.raw += artifact.coefficients[i] * values[i];
  r.probability = artifact.calibration ? sigmoid(artifact.calibration->a * r.raw + artifact.calibration->b)
                                       : sigmoid(r.raw);
  return r;
}

void to_json(Json& j, const ModelSpec& s) {
  j = Json{{"task_id", s.task_id},
           {"model_id", s.model_id},
           {"version", s.version},
           {"stage", to_string(s.stage)},
           {"serving_handle", s.serving_handle},
           {"feature_refs", s.feature_refs},
           {"metadata_generator_ids", s.metadata_generator_ids},
           {"provenance_ref", s.provenance_ref},
           {"artifact_digest", s.artifact_digest},
           {"metrics", s.metrics},
           {"thresholds", s.thresholds},
           {"registered_seq", s.registered_seq},
           {"registered_at", s.registered_at}};
}

void from_json(const Json& j, ModelSpec& s) {
  s.task_id = j.at("task_id").get<std::string>();
  s.model_id = j.at("model_id").get<std::string>();
  s.version = j.value("version", 0);
  s.stage = parse_stage(j.value("stage", std::string("None")));
  s.serving_handle = j.value("serving_handle", std::string{});
  s.feature_refs = j.at("feature_refs").get<std::vector<FeatureRef>>();
  s.metadata_generator_ids = j.value("metadata_generator_ids", std::vector<std::string>{});
  s.provenance_ref = j.value("provenance_ref", Digest{});
  s.artifact_digest = j.value("artifact_digest", Digest{});
  s.metrics = j.value("metrics", std::map<std::string, double>{});
  s.thresholds = j.value("thresholds", std::map<std::string, double>{});
  s.registered_seq = j.value("registered_seq", std::uint64_t{0});
  s.registered_at = j.value("registered_at", std::string{});
}

void to_json(Json& j, const ProvenanceFeature& f) {
  j = Json{{"name", f.name}, {"version", f.version}, {"generator_id", f.generator_id}, {"params_digest", f.params_digest}};
}

void from_json(const Json& j, ProvenanceFeature& f) {
  f.name = j.at("name").get<std::string>();
  f.version = j.at("version").get<int>();
  f.generator_id = j.at("generator_id").get<std::string>();
  f.params_digest = j.at("params_digest").get<Digest>();
}

void to_json(Json& j, const ProvenanceRecord& r) {
  j = r.identity_content();
  j["record_digest"] = r.record_digest;
  j["created_at"] = r.created_at;
}

void from_json(const Json& j, ProvenanceRecord& r) {
  r.record_digest = j.value("record_digest", Digest{});
  r.train_cohort_digest = j.at("train_cohort_digest").get<Digest>();
  r.test_cohort_digest = j.at("test_cohort_digest").get<Digest>();
  r.feature_definitions = j.at("feature_definitions").get<std::vector<ProvenanceFeature>>();
  r.algorithm = j.at("algorithm").get<std::string>();
  r.hyperparameters = j.value("hyperparameters", Json::object());
  r.metrics = j.value("metrics", std::map<std::string, double>{});
  r.code_revision = j.value("code_revision", std::string{});
  r.created_at = j.value("created_at", std::string{});
}

void to_json(Json& j, const ModelArtifact& a) {
  j = a.content();
  j["artifact_digest"] = a.artifact_digest;
}

void from_json(const Json& j, ModelArtifact& a) {
  a.artifact_digest = j.value("artifact_digest", Digest{});
  a.format = j.value("format", std::string(kLinearFormat));
  a.intercept = j.at("intercept").get<double>();
  a.coefficients = j.at("coefficients").get<std::vector<double>>();
  a.link = j.value("link", std::string("logit"));
  if (j.contains("calibration") && !j.at("calibration").is_null()) {
    a.calibration = PlattCalibration{j.at("calibration").at("a").get<double>(), j.at("calibration").at("b").get<double>()};
  } else {
    a.calibration.reset();
  }
}

}  // namespace lm::model
