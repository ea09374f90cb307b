// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "lm/core/jsonl.hpp"
#include "lm/features/repository.hpp"

namespace lm::inference {

struct PredictionRequest {
  std::string task_id;
  std::string patient_id;
  Date as_of_date;
  features::FeaturePolicy feature_policy = features::FeaturePolicy::compute_on_miss;
  std::string api_key;  // never logged
};

struct PredictionRecord {
  std::string request_id;
  PredictionRequest request;
  std::string model_id;
  int model_version = 0;
  Digest vector_digest;
  double raw_score = 0;
  double probability = 0;
  int decision = 0;
  Json metadata = Json::object();
  std::vector<std::string> origin_flags;
  /// The served vector, kept so drift can be measured from the log.
  std::vector<features::FeatureEntry> features;
  std::string served_at;
  double latency_ms = 0;
};

struct FeedbackRecord {
  std::string request_id;
  int observed_outcome = 0;
  std::string workflow_state;
  std::string submitted_at;
  int revision = 0;  // assigned by the log; latest wins
};

struct FeedbackReceipt {
  std::string request_id;
  int revision = 0;
  bool created = false;
};

/// Append-only prediction log (`logs/predictions.jsonl`). Appends are
/// serialized, so the file order is the total order of predictions.
class PredictionLog {
 public:
  explicit PredictionLog(std::optional<std::filesystem::path> file = std::nullopt);

  /// Throws `Error(integrity)` on a duplicate request_id.
  void append(const PredictionRecord& r);
  std::optional<PredictionRecord> find(const std::string& request_id) const;
  /// Throws `Error(not_found)`.
  PredictionRecord get(const std::string& request_id) const;
  /// The most recent `limit` records for a model version, oldest first.
  std::vector<PredictionRecord> window(const std::string& model_id, int version, std::size_t limit) const;
  std::vector<PredictionRecord> all() const;
  std::size_t size() const;

 private:
  std::unique_ptr<JsonlAppender> out_;
  mutable std::shared_mutex mutex_;
  std::vector<PredictionRecord> records_;
  std::map<std::string, std::size_t, std::less<>> by_id_;
};

/// Feedback repository (`logs/feedback.jsonl`). Every distinct submission is
/// kept with an increasing revision per request id.
class FeedbackLog {
 public:
  explicit FeedbackLog(std::optional<std::filesystem::path> file = std::nullopt);

  /// Identical to the latest revision → that receipt, nothing appended.
  FeedbackReceipt submit(FeedbackRecord fb);
  std::optional<FeedbackRecord> latest(const std::string& request_id) const;
  std::map<std::string, FeedbackRecord> latest_all() const;
  std::size_t size() const;

 private:
  std::unique_ptr<JsonlAppender> out_;
  mutable std::shared_mutex mutex_;
  std::map<std::string, FeedbackRecord> latest_;
  std::size_t count_ = 0;
};

void to_json(Json& j, const PredictionRequest& r);
void from_json(const Json& j, PredictionRequest& r);
void to_json(Json& j, const PredictionRecord& r);
void from_json(const Json& j, PredictionRecord& r);
void to_json(Json& j, const FeedbackRecord& r);
void from_json(const Json& j, FeedbackRecord& r);
void to_json(Json& j, const FeedbackReceipt& r);

}  // namespace lm::inference
