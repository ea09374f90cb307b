// SPDX-License-Identifier: Apache-2.0
#include "lm/model/registry.hpp"

#include <cstdio>
#include <limits>
#include <mutex>

#include "lm/core/canonical.hpp"
#include "lm/core/error.hpp"

namespace lm::model {

namespace fs = std::filesystem;

ModelRegistry::ModelRegistry(std::optional<fs::path> data_root) {
  if (!data_root) {
    content_ = std::make_unique<ContentStore>();
    return;
  }
  fs::create_directories(*data_root);
  content_ = std::make_unique<ContentStore>(*data_root / "artifacts");
  const auto file = *data_root / "registry.jsonl";
  read_jsonl(file, [&](const Json& event) { apply_locked(event); });
  log_ = std::make_unique<JsonlAppender>(file);
}

void ModelRegistry::append_locked(const Json& event) {
  if (log_) log_->append(event);
  apply_locked(event);
}

void ModelRegistry::apply_locked(const Json& event) {
  const auto& kind = event.at("kind").get_ref<const std::string&>();
  if (kind == "register") {
    auto spec = event.at("spec").get<ModelSpec>();
    seq_ = std::max(seq_, spec.registered_seq);
    specs_[{spec.model_id, spec.version}] = std::move(spec);
  } else if (kind == "transition") {
    auto t = event.at("event").get<TransitionEvent>();
    ModelSpec* spec = find_locked(t.model_id, t.version);
    if (!spec) throw Error(ErrorCode::corruption, "registry log transitions unknown model " + t.model_id);
    spec->stage = t.to;
    audit_.push_back(std::move(t));
  } else if (kind == "run") {
    auto r = event.at("run").get<RunRecord>();
    unsigned long long n = 0;
    if (std::sscanf(r.run_id.c_str(), "run-%llu", &n) == 1) run_seq_ = std::max<std::uint64_t>(run_seq_, n);
    runs_[r.run_id] = std::move(r);
  } else {
    throw Error(ErrorCode::corruption, "unknown registry event '" + kind + "'");
  }
}

ModelSpec* ModelRegistry::find_locked(const std::string& model_id, int version) {
  auto it = specs_.find({model_id, version});
  return it == specs_.end() ? nullptr : &it->second;
}

const ModelSpec* ModelRegistry::find_locked(const std::string& model_id, int version) const {
  auto it = specs_.find({model_id, version});
  return it == specs_.end() ? nullptr : &it->second;
}

Digest ModelRegistry::store_provenance(ProvenanceRecord prov) {
  const Digest d = prov.compute_digest();
  if (!prov.record_digest.empty() && prov.record_digest != d) {
    throw Error(ErrorCode::integrity, "provenance record_digest does not match its content");
  }
  prov.record_digest = d;
  if (prov.created_at.empty()) prov.created_at = utc_timestamp_now();
  content_->put_as(d, canonical_encode(prov));
  return d;
}

Digest ModelRegistry::store_cohort(const Cohort& cohort) { return content_->put(canonical_encode_json(cohort.content())); }

ModelArtifact ModelRegistry::store_artifact(ModelArtifact artifact) {
  artifact.artifact_digest = content_->put(canonical_encode_json(artifact.content()));
  return artifact;
}

ModelSpec ModelRegistry::register_model(ModelSpec draft, ModelArtifact artifact, ProvenanceRecord prov) {
  const Digest ref = store_provenance(std::move(prov));
  return register_model(std::move(draft), std::move(artifact), ref);
}

ModelSpec ModelRegistry::register_model(ModelSpec draft, ModelArtifact artifact, const Digest& provenance_ref) {
  if (draft.model_id.empty() || draft.task_id.empty()) throw Error(ErrorCode::spec, "model_id and task_id are required");
  if (draft.feature_refs.empty()) throw Error(ErrorCode::spec, "feature_refs must be non-empty");
  if (artifact.coefficients.size() != draft.feature_refs.size()) {
    throw Error(ErrorCode::spec, "artifact has " + std::to_string(artifact.coefficients.size()) +
                                     " coefficients for " + std::to_string(draft.feature_refs.size()) + " features");
  }
  if (!content_->contains(provenance_ref)) {
    throw Error(ErrorCode::integrity, "provenance " + provenance_ref.hex() + " is not stored");
  }
  artifact = store_artifact(std::move(artifact));

  std::unique_lock lock(mutex_);
  int max_version = 0;
  for (const auto& [key, spec] : specs_) {
    if (key.first != draft.model_id) continue;
    if (spec.artifact_digest == artifact.artifact_digest && spec.provenance_ref == provenance_ref) return spec;
    max_version = std::max(max_version, key.second);
  }
  draft.version = max_version + 1;
  draft.stage = Stage::None;
  draft.provenance_ref = provenance_ref;
  draft.artifact_digest = artifact.artifact_digest;
  if (draft.serving_handle.empty()) draft.serving_handle = "inproc://" + artifact.artifact_digest.hex();
  draft.thresholds.try_emplace(std::string(kDecisionThreshold), 0.5);
  draft.registered_seq = seq_ + 1;
  draft.registered_at = utc_timestamp_now();
  append_locked(Json{{"kind", "register"}, {"spec", draft}});
  return draft;
}

ModelSpec ModelRegistry::transition_stage(const std::string& model_id, int version, Stage to, const std::string& actor) {
  std::unique_lock lock(mutex_);
  const ModelSpec* spec = find_locked(model_id, version);
  if (!spec) throw Error(ErrorCode::not_found, "model " + model_id + " v" + std::to_string(version) + " not found");
  const Stage from = spec->stage;
  if (!transition_allowed(from, to)) {
    throw Error(ErrorCode::transition, "cannot move " + model_id + " v" + std::to_string(version) + " from " +
                                           std::string(to_string(from)) + " to " + std::string(to_string(to)));
  }
  const std::string now = utc_timestamp_now();
  if (to == Stage::Production) {
    std::vector<int> previous;
    for (const auto& [key, other] : specs_) {
      if (key.first == model_id && key.second != version && other.task_id == spec->task_id &&
          other.stage == Stage::Production) {
        previous.push_back(key.second);
      }
    }
    for (int v : previous) {
      TransitionEvent archive{model_id, v, Stage::Production, Stage::Archived, actor,
                              "superseded by v" + std::to_string(version), now};
      append_locked(Json{{"kind", "transition"}, {"event", archive}});
    }
  }
  append_locked(Json{{"kind", "transition"}, {"event", TransitionEvent{model_id, version, from, to, actor, "", now}}});
  return *find_locked(model_id, version);
}

ModelSpec ModelRegistry::get_best_model(const std::string& task_id, const std::string& primary_metric) const {
  std::shared_lock lock(mutex_);
  const ModelSpec* best = nullptr;
  double best_metric = 0;
  for (const auto& [_, spec] : specs_) {
    if (spec.task_id != task_id || spec.stage != Stage::Production) continue;
    auto it = spec.metrics.find(primary_metric);
    const double m = it == spec.metrics.end() ? -std::numeric_limits<double>::infinity() : it->second;
    if (!best || m > best_metric || (m == best_metric && spec.registered_seq > best->registered_seq)) {
      best = &spec;
      best_metric = m;
    }
  }
  if (!best) throw Error(ErrorCode::no_model, "no Production model for task '" + task_id + "'");
  return *best;
}

ModelSpec ModelRegistry::get_model(const std::string& model_id, int version) const {
  std::shared_lock lock(mutex_);
  const ModelSpec* spec = find_locked(model_id, version);
  if (!spec) throw Error(ErrorCode::not_found, "model " + model_id + " v" + std::to_string(version) + " not found");
  return *spec;
}

std::vector<ModelSpec> ModelRegistry::list_models(const std::string& task_id) const {
  std::shared_lock lock(mutex_);
  std::vector<ModelSpec> out;
  for (const auto& [_, spec] : specs_)
    if (task_id.empty() || spec.task_id == task_id) out.push_back(spec);
  return out;
}

std::vector<TransitionEvent> ModelRegistry::audit_log() const {
  std::shared_lock lock(mutex_);
  return audit_;
}

ModelArtifact ModelRegistry::load_artifact(const Digest& artifact_digest) const {
  const auto bytes = content_->get(artifact_digest);
  ModelArtifact a;
  try {
    a = Json::parse(bytes).get<ModelArtifact>();
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::corruption, "artifact " + artifact_digest.hex() + " is unreadable: " + e.what());
  }
  a.artifact_digest = artifact_digest;
  return a;
}

ProvenanceRecord ModelRegistry::get_provenance(const Digest& d) const {
  const auto bytes = content_->get_unverified(d);
  ProvenanceRecord r;
  try {
    r = Json::parse(bytes).get<ProvenanceRecord>();
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::corruption, "provenance " + d.hex() + " is unreadable: " + e.what());
  }
  if (r.compute_digest() != d || r.record_digest != d || canonical_encode(r) != bytes) {
    throw Error(ErrorCode::corruption, "provenance " + d.hex() + " fails verification");
  }
  return r;
}

Lineage ModelRegistry::get_lineage(const Digest& provenance_ref, const features::FeatureCatalog* catalog) const {
  Lineage l;
  l.record = get_provenance(provenance_ref);
  l.train_cohort = Json::parse(content_->get(l.record.train_cohort_digest));
  l.test_cohort = Json::parse(content_->get(l.record.test_cohort_digest));
  if (catalog) {
    for (const auto& f : l.record.feature_definitions) {
      const auto& def = catalog->get({f.name, f.version});
      if (def.generator_id != f.generator_id || def.params_digest() != f.params_digest) {
        throw Error(ErrorCode::integrity, "catalog definition of " + def.ref().label() + " differs from provenance");
      }
      l.feature_definitions.push_back(def);
    }
  }
  return l;
}

std::string ModelRegistry::begin_run(const std::string& task_id, const std::string& model_id) {
  std::unique_lock lock(mutex_);
  char id[32];
  std::snprintf(id, sizeof id, "run-%06llu", static_cast<unsigned long long>(run_seq_ + 1));
  RunRecord r{id, task_id, model_id, "running:split", "", std::nullopt, utc_timestamp_now()};
  append_locked(Json{{"kind", "run"}, {"run", r}});
  return r.run_id;
}

void ModelRegistry::update_run(const std::string& run_id, const std::string& status, const std::string& detail,
                               std::optional<int> version) {
  std::unique_lock lock(mutex_);
  auto it = runs_.find(run_id);
  if (it == runs_.end()) throw Error(ErrorCode::not_found, "run '" + run_id + "' not found");
  RunRecord r = it->second;
  r.status = status;
  r.detail = detail;
  if (version) r.version = version;
  r.updated_at = utc_timestamp_now();
  append_locked(Json{{"kind", "run"}, {"run", r}});
}

RunRecord ModelRegistry::get_run(const std::string& run_id) const {
  std::shared_lock lock(mutex_);
  auto it = runs_.find(run_id);
  if (it == runs_.end()) throw Error(ErrorCode::not_found, "run '" + run_id + "' not found");
  return it->second;
}

std::vector<RunRecord> ModelRegistry::list_runs() const {
  std::shared_lock lock(mutex_);
  std::vector<RunRecord> out;
  for (const auto& [_, r] : runs_) out.push_back(r);
  return out;
}

void to_json(Json& j, const TransitionEvent& e) {
  j = Json{{"model_id", e.model_id}, {"version", e.version}, {"from", to_string(e.from)}, {"to", to_string(e.to)},
           {"actor", e.actor},       {"reason", e.reason},   {"at", e.at}};
}

void from_json(const Json& j, TransitionEvent& e) {
  e.model_id = j.at("model_id").get<std::string>();
  e.version = j.at("version").get<int>();
  e.from = parse_stage(j.at("from").get<std::string>());
  e.to = parse_stage(j.at("to").get<std::string>());
  e.actor = j.value("actor", std::string{});
  e.reason = j.value("reason", std::string{});
  e.at = j.value("at", std::string{});
}

void to_json(Json& j, const RunRecord& r) {
  j = Json{{"run_id", r.run_id}, {"task_id", r.task_id}, {"model_id", r.model_id},
           {"status", r.status}, {"detail", r.detail},   {"updated_at", r.updated_at}};
  j["version"] = r.version ? Json(*r.version) : Json(nullptr);
}

void from_json(const Json& j, RunRecord& r) {
  r.run_id = j.at("run_id").get<std::string>();
  r.task_id = j.value("task_id", std::string{});
  r.model_id = j.value("model_id", std::string{});
  r.status = j.at("status").get<std::string>();
  r.detail = j.value("detail", std::string{});
  r.updated_at = j.value("updated_at", std::string{});
  if (j.contains("version") && !j.at("version").is_null()) r.version = j.at("version").get<int>();
}

void to_json(Json& j, const Lineage& l) {
  j = Json{{"record", l.record},
           {"train_cohort", l.train_cohort},
           {"test_cohort", l.test_cohort},
           {"feature_definitions", l.feature_definitions}};
}

}  // namespace lm::model
