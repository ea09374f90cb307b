// SPDX-License-Identifier: Apache-2.0
#include "lm/training/pipeline.hpp"

#include <cmath>
#include <cstdlib>

#include "lm/core/error.hpp"
#include "lm/core/jsonl.hpp"
#include "lm/ingest/cohort.hpp"
#include "lm/training/metrics.hpp"

namespace lm::training {

using features::FeatureRef;

void TrainConfig::validate() const {
  if (task_id.empty()) throw Error(ErrorCode::config, "task_id is required");
  if (cohort_id.empty()) throw Error(ErrorCode::config, "cohort_id is required");
  if (feature_refs.empty()) throw Error(ErrorCode::config, "at least one feature is required");
  if (algorithm != kAlgorithm) throw Error(ErrorCode::config, "unsupported algorithm '" + algorithm + "'");
  if (!(train_fraction > 0) || !(test_fraction > 0) || std::abs(train_fraction + test_fraction - 1.0) > 1e-9) {
    throw Error(ErrorCode::config, "split fractions must be positive and sum to 1");
  }
  hyperparameters.validate();
}

TrainConfig load_train_config(const std::filesystem::path& file) {
  if (!std::filesystem::exists(file)) throw Error(ErrorCode::config, "config file " + file.string() + " not found");
  try {
    auto cfg = Json::parse(read_file(file)).get<TrainConfig>();
    cfg.validate();
    return cfg;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::config, "bad train config " + file.string() + ": " + e.what());
  }
}

std::map<std::string, double> EvalReport::as_metrics() const {
  return {{"auc_train", auc_train},
          {"auc_test", auc_test},
          {"accuracy_test", accuracy_test},
          {"brier_test", brier_test},
          {"n_train", static_cast<double>(n_train)},
          {"n_test", static_cast<double>(n_test)},
          {"label_prevalence", label_prevalence}};
}

std::vector<features::FeatureVector> training_rows(const features::FeatureRepository& repo,
                                                   const ingest::TimelineIndex& timelines,
                                                   const std::vector<FeatureRef>& refs,
                                                   const std::vector<CohortRow>& rows) {
  std::vector<features::FeatureVector> out;
  out.reserve(rows.size());
  for (const auto& r : rows) {
    out.push_back(
        repo.get_vector_asof(timelines, r.patient_id, refs, r.index_date, features::FeaturePolicy::precomputed_only)
            .vector);
  }
  return out;
}

namespace {

struct Standardizer {
  std::vector<double> mean, sd;

  static Standardizer fit(const Matrix& X) {
    const std::size_t d = X.front().size();
    Standardizer s{std::vector<double>(d, 0.0), std::vector<double>(d, 0.0)};
    for (const auto& row : X)
      for (std::size_t j = 0; j < d; ++j) s.mean[j] += row[j];
    for (auto& m : s.mean) m /= static_cast<double>(X.size());
    for (const auto& row : X)
      for (std::size_t j = 0; j < d; ++j) s.sd[j] += (row[j] - s.mean[j]) * (row[j] - s.mean[j]);
    for (auto& v : s.sd) {
      v = std::sqrt(v / static_cast<double>(X.size()));
      if (v < 1e-12) v = 1.0;  // constant column
    }
    return s;
  }

  Matrix apply(const Matrix& X) const {
    Matrix out = X;
    for (auto& row : out)
      for (std::size_t j = 0; j < row.size(); ++j) row[j] = (row[j] - mean[j]) / sd[j];
    return out;
  }

  // Maps a model on standardized inputs to the same function of raw inputs.
  LinearModel fold(const LinearModel& m) const {
    LinearModel raw{m.intercept, std::vector<double>(m.coefficients.size())};
    for (std::size_t j = 0; j < m.coefficients.size(); ++j) {
      raw.coefficients[j] = m.coefficients[j] / sd[j];
      raw.intercept -= m.coefficients[j] * mean[j] / sd[j];
    }
    return raw;
  }
};

Matrix to_matrix(const std::vector<features::FeatureVector>& vectors) {
  Matrix X;
  X.reserve(vectors.size());
  for (const auto& v : vectors) X.push_back(v.numeric_values());
  return X;
}

std::vector<int> labels_of(const std::vector<CohortRow>& rows) {
  std::vector<int> y;
  y.reserve(rows.size());
  for (const auto& r : rows) y.push_back(r.label);
  return y;
}

std::vector<double> probabilities(const model::ModelArtifact& a, const Matrix& X) {
  std::vector<double> p;
  p.reserve(X.size());
  for (const auto& row : X) p.push_back(model::score_linear(a, row).probability);
  return p;
}

std::string code_revision() {
  const char* env = std::getenv("LM_CODE_REVISION");
  return env && *env ? env : "unknown";
}

}  // namespace

PipelineResult run_pipeline(const PipelineEnv& env, const TrainConfig& cfg) {
  cfg.validate();
  PipelineResult result;
  const std::string model_id = cfg.effective_model_id();
  auto& registry = env.registry;
  result.run_id = registry.begin_run(cfg.task_id, model_id);

  std::string stage = "split";
  auto enter = [&](const char* name) {
    stage = name;
    registry.update_run(result.run_id, "running:" + stage);
  };

  try {
    // split
    const Cohort cohort = env.load_cohort(cfg.cohort_id);
    auto [train, test] = ingest::split_cohort(cohort, cfg.train_fraction, cfg.test_fraction, cfg.hyperparameters.seed);

    enter("features");
    std::vector<FeatureRef> refs;
    std::vector<std::pair<std::string, int>> named;
    for (const auto& r : cfg.feature_refs) {
      const auto& def = r.version == 0 ? env.features.catalog().latest(r.name) : env.features.catalog().get(r);
      if (def.value_type != features::ValueType::numeric) {
        throw Error(ErrorCode::spec, "feature " + def.ref().label() + " is categorical; models take numeric features");
      }
      refs.push_back(def.ref());
      named.emplace_back(def.name, def.version);
    }
    std::vector<features::Cell> cells;
    for (const auto* part : {&train.rows, &test.rows})
      for (const auto& row : *part) cells.push_back({row.patient_id, row.index_date});
    const auto mat = env.features.materialize(env.timelines, refs, cells, cfg.threads);
    if (!mat.failures.empty()) {
      const auto& f = mat.failures.front();
      throw Error(ErrorCode::spec, std::to_string(mat.failures.size()) + " feature cells failed, first " +
                                       f.feature.label() + " for " + f.patient_id + ": " + f.message);
    }
    const Matrix X_train = to_matrix(training_rows(env.features, env.timelines, refs, train.rows));
    const Matrix X_test = to_matrix(training_rows(env.features, env.timelines, refs, test.rows));
    const auto y_train = labels_of(train.rows), y_test = labels_of(test.rows);

    enter("train");
    const auto scaler = Standardizer::fit(X_train);
    const LinearModel fitted = scaler.fold(train_logreg(scaler.apply(X_train), y_train, cfg.hyperparameters));
    result.artifact.intercept = fitted.intercept;
    result.artifact.coefficients = fitted.coefficients;

    enter("calibrate");
    if (cfg.calibrate) {
      const auto platt = fit_platt(fitted.raw(X_train), y_train);
      result.artifact.calibration = model::PlattCalibration{platt.a, platt.b};
    }

    enter("evaluate");
    const auto p_train = probabilities(result.artifact, X_train);
    const auto p_test = probabilities(result.artifact, X_test);
    auto& rep = result.report;
    rep.auc_train = auc(p_train, y_train);
    rep.auc_test = auc(p_test, y_test);
    rep.accuracy_test = accuracy(p_test, y_test, 0.5);
    rep.brier_test = brier(p_test, y_test);
    rep.n_train = y_train.size();
    rep.n_test = y_test.size();
    std::size_t positives = 0;
    for (const auto& r : cohort.rows) positives += r.label == 1;
    rep.label_prevalence = static_cast<double>(positives) / static_cast<double>(cohort.rows.size());
    std::vector<std::string> names;
    for (const auto& r : refs) names.push_back(r.name);
    result.importance = permutation_importance(fitted, X_test, y_test, cfg.hyperparameters.seed, 5, names);

    enter("register");
    auto& prov = result.provenance;
    prov.train_cohort_digest = registry.store_cohort(train);
    prov.test_cohort_digest = registry.store_cohort(test);
    for (const auto& r : refs) {
      const auto& def = env.features.catalog().get(r);
      prov.feature_definitions.push_back({def.name, def.version, def.generator_id, def.params_digest()});
    }
    prov.algorithm = cfg.algorithm;
    prov.hyperparameters = Json(cfg.hyperparameters);
    prov.hyperparameters["train_fraction"] = cfg.train_fraction;
    prov.hyperparameters["test_fraction"] = cfg.test_fraction;
    prov.hyperparameters["calibrate"] = cfg.calibrate;
    prov.metrics = rep.as_metrics();
    prov.code_revision = code_revision();
    prov.created_at = utc_timestamp_now();
    prov.record_digest = registry.store_provenance(prov);

    model::ModelSpec draft;
    draft.task_id = cfg.task_id;
    draft.model_id = model_id;
    draft.feature_refs = refs;
    draft.metadata_generator_ids = cfg.metadata_generator_ids;
    draft.metrics = rep.as_metrics();
    draft.thresholds = {{std::string(model::kDecisionThreshold), 0.5}};
    result.spec = registry.register_model(draft, result.artifact, prov.record_digest);
    result.artifact.artifact_digest = result.spec.artifact_digest;

    result.profile = monitoring::build_profile(model_id, result.spec.version, named, X_train, p_train);
    if (env.profiles_dir) monitoring::save_profile(*env.profiles_dir, result.profile);
    registry.update_run(result.run_id, "registered", "", result.spec.version);
  } catch (const Error& e) {
    registry.update_run(result.run_id, "failed:" + stage, e.what());
    throw PipelineError(stage, e.code(), stage + ": " + e.what());
  } catch (const std::exception& e) {
    registry.update_run(result.run_id, "failed:" + stage, e.what());
    throw PipelineError(stage, ErrorCode::io, stage + ": " + e.what());
  }
  return result;
}

void to_json(Json& j, const TrainConfig& c) {
  j = Json{{"task_id", c.task_id},
           {"model_id", c.model_id},
           {"cohort_id", c.cohort_id},
           {"feature_refs", c.feature_refs},
           {"algorithm", c.algorithm},
           {"hyperparameters", c.hyperparameters},
           {"split", {{"train_fraction", c.train_fraction}, {"test_fraction", c.test_fraction}}},
           {"calibrate", c.calibrate},
           {"primary_metric", c.primary_metric},
           {"metadata_generator_ids", c.metadata_generator_ids},
           {"threads", c.threads}};
}

void from_json(const Json& j, TrainConfig& c) {
  TrainConfig d;
  c.task_id = j.at("task_id").get<std::string>();
  c.model_id = j.value("model_id", std::string{});
  c.cohort_id = j.at("cohort_id").get<std::string>();
  c.feature_refs.clear();
  for (const auto& f : j.at("feature_refs")) {
    if (f.is_string()) {
      c.feature_refs.push_back({f.get<std::string>(), 0});
    } else {
      c.feature_refs.push_back(f.get<FeatureRef>());
    }
  }
  c.algorithm = j.value("algorithm", d.algorithm);
  c.hyperparameters = j.value("hyperparameters", d.hyperparameters);
  if (j.contains("split")) {
    c.train_fraction = j.at("split").value("train_fraction", d.train_fraction);
    c.test_fraction = j.at("split").value("test_fraction", d.test_fraction);
  }
  c.calibrate = j.value("calibrate", d.calibrate);
  c.primary_metric = j.value("primary_metric", d.primary_metric);
  c.metadata_generator_ids = j.value("metadata_generator_ids", d.metadata_generator_ids);
  c.threads = j.value("threads", 0u);
}

void to_json(Json& j, const EvalReport& r) {
  j = Json(r.as_metrics());
}

}  // namespace lm::training
