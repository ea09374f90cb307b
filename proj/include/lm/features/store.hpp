// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "lm/core/jsonl.hpp"
#include "lm/features/catalog.hpp"

namespace lm::features {

struct FeatureValue {
  std::string patient_id;
  std::string feature_name;
  int feature_version = 0;
  Date as_of_date;
  FeatureScalar value;
  std::string computed_at;
};

struct StoredValue {
  FeatureScalar value;
  bool stale = false;
};

/// Point-in-time value store keyed by (patient, feature, version, as_of).
/// Persisted as an append-only log of value and staleness records; the
/// in-memory index is rebuilt from it on construction. Readers share a lock,
/// writers are serialized.
class FeatureValueStore {
 public:
  explicit FeatureValueStore(std::optional<std::filesystem::path> dir = std::nullopt);

  std::optional<StoredValue> get(const std::string& patient_id, const FeatureRef& ref, Date as_of) const;
  /// One cell's values for `refs` in order, under a single lock.
  std::vector<std::optional<StoredValue>> get_cell(const std::string& patient_id, const std::vector<FeatureRef>& refs,
                                                   Date as_of) const;

  /// Inserts or overwrites values and clears their staleness.
  void put(const std::vector<FeatureValue>& values);

  /// Flags every stored value of the named features (all versions) stale.
  /// Returns the number of values flagged.
  std::size_t mark_stale(const std::set<std::string>& feature_names);

  std::size_t size() const;
  std::size_t stale_count() const;
  /// Snapshot of all stored values, ordered by key.
  std::vector<FeatureValue> snapshot() const;

 private:
  struct Entry {
    FeatureValue value;
    bool stale = false;
  };
  // Two levels so a whole vector costs one probe of the big table.
  using CellIndex = std::unordered_map<std::string, Entry>;  // name + version
  static std::string cell_key(const std::string& patient_id, Date as_of);
  static std::string feature_key(const std::string& name, int version);
  const Entry* find_locked(const std::string& cell, const FeatureRef& ref) const;
  void insert_locked(FeatureValue v);
  void apply_stale_locked(const std::set<std::string>& names, std::size_t* flagged);

  std::unique_ptr<JsonlAppender> log_;
  mutable std::shared_mutex mutex_;
  std::unordered_map<std::string, CellIndex> cells_;
  std::size_t size_ = 0;
  // Node-based maps keep these pointers valid across rehashing.
  std::unordered_map<std::string, std::vector<Entry*>> entries_by_feature_;
};

void to_json(Json& j, const FeatureValue& v);
void from_json(const Json& j, FeatureValue& v);

}  // namespace lm::features
