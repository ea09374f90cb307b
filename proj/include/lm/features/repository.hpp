// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "lm/features/catalog.hpp"
#include "lm/features/store.hpp"
#include "lm/ingest/dataset.hpp"

namespace lm::features {

enum class FeaturePolicy { precomputed_only, compute_on_miss };
enum class EntryOrigin { stored, computed };

std::string_view to_string(FeaturePolicy p) noexcept;
FeaturePolicy parse_feature_policy(std::string_view s);
std::string_view to_string(EntryOrigin o) noexcept;

struct FeatureEntry {
  std::string name;
  int version = 0;
  FeatureScalar value;

  bool operator==(const FeatureEntry&) const = default;
};

struct FeatureVector {
  std::string patient_id;
  Date as_of_date;
  std::vector<FeatureEntry> entries;
  Digest vector_digest;

  /// Digest of the canonical encoding of {patient_id, as_of_date, entries}.
  Digest compute_digest() const;
  /// Entry values as doubles; throws `Error(spec)` on categorical entries.
  std::vector<double> numeric_values() const;
};

struct VectorResult {
  FeatureVector vector;
  std::vector<EntryOrigin> origins;  // parallel to vector.entries
};

/// One (patient, as-of date) pair to materialize.
struct Cell {
  std::string patient_id;
  Date as_of;
};

struct CellFailure {
  std::string patient_id;
  FeatureRef feature;
  Date as_of;
  std::string message;
};

struct MaterializeReport {
  std::size_t written = 0;
  std::size_t skipped = 0;
  std::vector<CellFailure> failures;
};

/// Feature catalog plus point-in-time value store. Every value, whether
/// materialized in batch or computed on a serving miss, goes through the same
/// cell evaluation routine, so training and serving cannot diverge.
class FeatureRepository {
 public:
  /// In-memory repository when `data_root` is empty; otherwise the catalog
  /// lives at `<data_root>/catalog.jsonl` and values under `<data_root>/features/`.
  explicit FeatureRepository(std::optional<std::filesystem::path> data_root = std::nullopt,
                             std::shared_ptr<const GeneratorRegistry> generators = nullptr);

  FeatureCatalog& catalog() { return catalog_; }
  const FeatureCatalog& catalog() const { return catalog_; }
  FeatureValueStore& store() { return store_; }
  const FeatureValueStore& store() const { return store_; }

  RegistrationReceipt register_feature(FeatureDefinition def) { return catalog_.register_feature(std::move(def)); }
  std::vector<FeatureDefinition> search_catalog(const std::string& query) const { return catalog_.search(query); }
  ExecutionStages resolve_execution_order(const std::vector<std::string>& names) const {
    return catalog_.resolve_execution_order(names);
  }

  /// Computes and stores values for every cell and every feature in the
  /// dependency closure of `refs`, stage by stage. Cells already stored and
  /// not stale are skipped. Generator failures are recorded per cell (and
  /// propagate to dependents) without aborting the batch. `threads == 0`
  /// picks the hardware concurrency.
  MaterializeReport materialize(const ingest::TimelineIndex& timelines, const std::vector<FeatureRef>& refs,
                                const std::vector<Cell>& cells, unsigned threads = 0);
  /// Every patient in `timelines` at every date, using latest feature versions.
  MaterializeReport materialize(const ingest::TimelineIndex& timelines, const std::vector<std::string>& names,
                                const std::vector<Date>& as_of_dates, unsigned threads = 0);

  /// Flags the feature and its transitive dependents stale; returns their names.
  std::set<std::string> mark_stale(const std::string& feature_name);

  /// Assembles the vector in exactly `refs` order. Under `precomputed_only`,
  /// missing or stale entries throw `FeatureMissError`; under
  /// `compute_on_miss` they are computed (and not written back).
  VectorResult get_vector_asof(const ingest::TimelineSource& timelines, const std::string& patient_id,
                               const std::vector<FeatureRef>& refs, Date as_of, FeaturePolicy policy) const;

  /// The single evaluation routine: computes one feature for one patient as
  /// of a date. `dependency_value` supplies values for the definition's
  /// pinned dependency refs.
  FeatureScalar evaluate_cell(const PatientTimeline& timeline, const FeatureDefinition& def, Date as_of,
                              const std::function<FeatureScalar(const FeatureRef&)>& dependency_value) const;

 private:
  FeatureScalar compute_recursive(const PatientTimeline& timeline, const FeatureRef& ref, Date as_of,
                                  bool* computed) const;

  std::shared_ptr<const GeneratorRegistry> generators_;
  FeatureCatalog catalog_;
  FeatureValueStore store_;
};

void to_json(Json& j, const FeatureEntry& e);
void from_json(const Json& j, FeatureEntry& e);
void to_json(Json& j, const FeatureVector& v);
void from_json(const Json& j, FeatureVector& v);

}  // namespace lm::features
