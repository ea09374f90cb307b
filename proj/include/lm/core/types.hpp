// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "lm/core/date.hpp"
#include "lm/core/digest.hpp"

namespace lm {

using Json = nlohmann::json;

enum class EventType { diagnosis, procedure, admission, pharmacy };
enum class Sex { F, M, U };

std::string_view to_string(EventType t) noexcept;
std::string_view to_string(Sex s) noexcept;
EventType parse_event_type(std::string_view s);
Sex parse_sex(std::string_view s);
inline constexpr EventType kAllEventTypes[] = {EventType::diagnosis, EventType::procedure,
                                               EventType::admission, EventType::pharmacy};

struct ClaimEvent {
  std::string patient_id;
  Date event_date;
  EventType event_type = EventType::diagnosis;
  std::string code;
  std::optional<double> value;
  std::string source;

  bool operator==(const ClaimEvent&) const = default;
};

/// Events are kept ascending by date; equal dates keep insertion order.
struct PatientTimeline {
  std::string patient_id;
  Date birth_date;
  Sex sex = Sex::U;
  std::vector<ClaimEvent> events;

  /// Stable-sorts `events` by date.
  void sort_events();
  bool operator==(const PatientTimeline&) const = default;
};

struct TargetSpec {
  EventType event_type = EventType::admission;
  std::set<std::string> code_set;
  int horizon_days = 90;

  bool matches(const ClaimEvent& e) const {
    return e.event_type == event_type && code_set.count(e.code) > 0;
  }
  /// Throws `Error(config)` when horizon < 1 or code_set is empty.
  void validate() const;
  bool operator==(const TargetSpec&) const = default;
};

struct CohortRow {
  std::string patient_id;
  Date index_date;
  int label = 0;

  bool operator==(const CohortRow&) const = default;
};

struct Cohort {
  std::string cohort_id;
  TargetSpec target_spec;
  std::vector<CohortRow> rows;
  Digest data_digest;

  /// Canonical content covered by `data_digest` (target spec and rows, not the id).
  Json content() const;
  Digest compute_digest() const;
  bool operator==(const Cohort&) const = default;
};

struct Violation {
  std::string kind;  // unsorted_events | patient_id_mismatch | event_before_birth
  std::size_t event_index = 0;
  std::string detail;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
  bool has(std::string_view kind) const;
};

ValidationReport validate_timeline(const PatientTimeline& t);

// JSON mapping used for persistence and for canonical encoding.
void to_json(Json& j, const Date& d);
void from_json(const Json& j, Date& d);
void to_json(Json& j, const EventType& t);
void from_json(const Json& j, EventType& t);
void to_json(Json& j, const Sex& s);
void from_json(const Json& j, Sex& s);
void to_json(Json& j, const ClaimEvent& e);
void from_json(const Json& j, ClaimEvent& e);
void to_json(Json& j, const PatientTimeline& t);
void from_json(const Json& j, PatientTimeline& t);
void to_json(Json& j, const TargetSpec& t);
void from_json(const Json& j, TargetSpec& t);
void to_json(Json& j, const CohortRow& r);
void from_json(const Json& j, CohortRow& r);
void to_json(Json& j, const Cohort& c);
void from_json(const Json& j, Cohort& c);

}  // namespace lm
