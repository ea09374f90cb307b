// SPDX-License-Identifier: Apache-2.0
#include "lm/inference/records.hpp"

#include <mutex>

#include "lm/core/error.hpp"

namespace lm::inference {

namespace fs = std::filesystem;

namespace {

std::unique_ptr<JsonlAppender> open_log(const std::optional<fs::path>& file) {
  if (!file) return nullptr;
  fs::create_directories(file->parent_path());
  return std::make_unique<JsonlAppender>(*file);
}

}  // namespace

PredictionLog::PredictionLog(std::optional<fs::path> file) {
  if (file) {
    read_jsonl(*file, [&](const Json& j) {
      auto r = j.get<PredictionRecord>();
      by_id_.emplace(r.request_id, records_.size());
      records_.push_back(std::move(r));
    });
  }
  out_ = open_log(file);
}

void PredictionLog::append(const PredictionRecord& r) {
  std::unique_lock lock(mutex_);
  if (by_id_.count(r.request_id)) throw Error(ErrorCode::integrity, "duplicate request_id " + r.request_id);
  if (out_) out_->append(Json(r));
  by_id_.emplace(r.request_id, records_.size());
  records_.push_back(r);
}

std::optional<PredictionRecord> PredictionLog::find(const std::string& request_id) const {
  std::shared_lock lock(mutex_);
  auto it = by_id_.find(request_id);
  if (it == by_id_.end()) return std::nullopt;
  return records_[it->second];
}

PredictionRecord PredictionLog::get(const std::string& request_id) const {
  auto r = find(request_id);
  if (!r) throw Error(ErrorCode::not_found, "prediction '" + request_id + "' not found");
  return *r;
}

std::vector<PredictionRecord> PredictionLog::window(const std::string& model_id, int version, std::size_t limit) const {
  std::shared_lock lock(mutex_);
  std::vector<PredictionRecord> out;
  for (auto it = records_.rbegin(); it != records_.rend() && out.size() < limit; ++it)
    if (it->model_id == model_id && it->model_version == version) out.push_back(*it);
  return {out.rbegin(), out.rend()};
}

std::vector<PredictionRecord> PredictionLog::all() const {
  std::shared_lock lock(mutex_);
  return records_;
}

std::size_t PredictionLog::size() const {
  std::shared_lock lock(mutex_);
  return records_.size();
}

FeedbackLog::FeedbackLog(std::optional<fs::path> file) {
  if (file) {
    read_jsonl(*file, [&](const Json& j) {
      auto fb = j.get<FeedbackRecord>();
      auto& slot = latest_[fb.request_id];
      if (fb.revision >= slot.revision) slot = std::move(fb);
      ++count_;
    });
  }
  out_ = open_log(file);
}

FeedbackReceipt FeedbackLog::submit(FeedbackRecord fb) {
  if (fb.observed_outcome != 0 && fb.observed_outcome != 1) {
    throw Error(ErrorCode::config, "observed_outcome must be 0 or 1");
  }
  std::unique_lock lock(mutex_);
  auto it = latest_.find(fb.request_id);
  if (it != latest_.end() && it->second.observed_outcome == fb.observed_outcome &&
      it->second.workflow_state == fb.workflow_state) {
    return {fb.request_id, it->second.revision, false};
  }
  fb.revision = it == latest_.end() ? 1 : it->second.revision + 1;
  if (fb.submitted_at.empty()) fb.submitted_at = utc_timestamp_now();
  if (out_) out_->append(Json(fb));
  latest_[fb.request_id] = fb;
  ++count_;
  return {fb.request_id, fb.revision, true};
}

std::optional<FeedbackRecord> FeedbackLog::latest(const std::string& request_id) const {
  std::shared_lock lock(mutex_);
  auto it = latest_.find(request_id);
  if (it == latest_.end()) return std::nullopt;
  return it->second;
}

std::map<std::string, FeedbackRecord> FeedbackLog::latest_all() const {
  std::shared_lock lock(mutex_);
  return latest_;
}

std::size_t FeedbackLog::size() const {
  std::shared_lock lock(mutex_);
  return count_;
}

void to_json(Json& j, const PredictionRequest& r) {
  j = Json{{"task_id", r.task_id},
           {"patient_id", r.patient_id},
           {"as_of_date", r.as_of_date},
           {"feature_policy", features::to_string(r.feature_policy)}};
}

void from_json(const Json& j, PredictionRequest& r) {
  r.task_id = j.at("task_id").get<std::string>();
  r.patient_id = j.at("patient_id").get<std::string>();
  r.as_of_date = j.at("as_of_date").get<Date>();
  r.feature_policy = features::parse_feature_policy(j.value("feature_policy", std::string("compute_on_miss")));
  r.api_key = j.value("api_key", std::string{});
}

void to_json(Json& j, const PredictionRecord& r) {
  j = Json{{"request_id", r.request_id},
           {"request", r.request},
           {"model_id", r.model_id},
           {"model_version", r.model_version},
           {"vector_digest", r.vector_digest},
           {"raw_score", r.raw_score},
           {"probability", r.probability},
           {"decision", r.decision},
           {"metadata", r.metadata},
           {"origin_flags", r.origin_flags},
           {"features", r.features},
           {"served_at", r.served_at},
           {"latency_ms", r.latency_ms}};
}

void from_json(const Json& j, PredictionRecord& r) {
  r.request_id = j.at("request_id").get<std::string>();
  r.request = j.at("request").get<PredictionRequest>();
  r.model_id = j.at("model_id").get<std::string>();
  r.model_version = j.at("model_version").get<int>();
  r.vector_digest = j.at("vector_digest").get<Digest>();
  r.raw_score = j.at("raw_score").get<double>();
  r.probability = j.at("probability").get<double>();
  r.decision = j.at("decision").get<int>();
  r.metadata = j.value("metadata", Json::object());
  r.origin_flags = j.value("origin_flags", std::vector<std::string>{});
  r.features = j.value("features", std::vector<features::FeatureEntry>{});
  r.served_at = j.value("served_at", std::string{});
  r.latency_ms = j.value("latency_ms", 0.0);
}

void to_json(Json& j, const FeedbackRecord& r) {
  j = Json{{"request_id", r.request_id},
           {"observed_outcome", r.observed_outcome},
           {"workflow_state", r.workflow_state},
           {"submitted_at", r.submitted_at},
           {"revision", r.revision}};
}

void from_json(const Json& j, FeedbackRecord& r) {
  r.request_id = j.at("request_id").get<std::string>();
  r.observed_outcome = j.at("observed_outcome").get<int>();
  r.workflow_state = j.value("workflow_state", std::string{});
  r.submitted_at = j.value("submitted_at", std::string{});
  r.revision = j.value("revision", 0);
}

void to_json(Json& j, const FeedbackReceipt& r) {
  j = Json{{"request_id", r.request_id}, {"revision", r.revision}, {"created", r.created}};
}

}  // namespace lm::inference
