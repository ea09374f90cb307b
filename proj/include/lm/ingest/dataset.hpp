// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "lm/core/types.hpp"

namespace lm::ingest {

/// Where a patient's raw events come from when a feature has to be computed.
class TimelineSource {
 public:
  virtual ~TimelineSource() = default;
  /// Throws `Error(not_found)`.
  virtual std::shared_ptr<const PatientTimeline> fetch(std::string_view patient_id) const = 0;
};

/// Immutable in-memory patient lookup shared by the feature repository, the
/// training pipeline and the inference service.
class TimelineIndex : public TimelineSource {
 public:
  TimelineIndex() = default;
  explicit TimelineIndex(std::vector<PatientTimeline> timelines);

  const PatientTimeline* find(std::string_view patient_id) const;
  /// Throws `Error(not_found)`.
  const PatientTimeline& at(std::string_view patient_id) const;
  std::span<const PatientTimeline> all() const { return timelines_; }
  std::size_t size() const { return timelines_.size(); }
  /// Non-owning; valid while the index lives.
  std::shared_ptr<const PatientTimeline> fetch(std::string_view patient_id) const override;

 private:
  std::vector<PatientTimeline> timelines_;
  std::unordered_map<std::string, std::size_t> by_id_;
};

/// Reads one patient's events from the dataset shards on every fetch. Only
/// demographics and byte ranges stay in memory, like a serving node that
/// goes back to the claims store on a feature miss. Thread-safe.
class DatasetTimelineSource : public TimelineSource {
 public:
  explicit DatasetTimelineSource(const std::filesystem::path& dir);
  std::shared_ptr<const PatientTimeline> fetch(std::string_view patient_id) const override;
  std::size_t size() const { return patients_.size(); }

 private:
  struct Range {
    std::uint32_t shard = 0;
    std::uint64_t offset = 0;
    std::uint64_t length = 0;
  };
  struct Located {
    PatientTimeline demographics;
    std::vector<Range> ranges;
  };
  std::vector<std::filesystem::path> shards_;
  std::unordered_map<std::string, Located> patients_;
};

/// Dataset layout inside a directory:
///   patients.jsonl       one {patient_id, birth_date, sex} per line
///   events-NNNN.jsonl    ClaimEvent lines, at most `events_per_shard` each
void write_timelines(const std::filesystem::path& dir, std::span<const PatientTimeline> timelines,
                     std::size_t events_per_shard = 50000);
/// Joins demographics with every `events-*.jsonl` file. Events of patients
/// without demographics throw `Error(config)`.
std::vector<PatientTimeline> load_timelines(const std::filesystem::path& dir);

void write_events(const std::filesystem::path& file, std::span<const ClaimEvent> events);

/// `cohort-<id>.jsonl` holds a header line {cohort_id, target_spec, data_digest,
/// row_count} followed by one CohortRow per line; `cohort-<id>.digest` holds
/// the hex digest.
void write_cohort(const std::filesystem::path& dir, const Cohort& cohort);
/// Verifies the sidecar and recomputed digests; mismatch throws `Error(corruption)`.
Cohort load_cohort(const std::filesystem::path& dir, const std::string& cohort_id);
std::vector<std::string> list_cohorts(const std::filesystem::path& dir);

}  // namespace lm::ingest
