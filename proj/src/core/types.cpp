// SPDX-License-Identifier: Apache-2.0
#include "lm/core/types.hpp"

#include <algorithm>

#include "lm/core/canonical.hpp"
#include "lm/core/error.hpp"

namespace lm {

std::string_view to_string(EventType t) noexcept {
  switch (t) {
    case EventType::diagnosis: return "diagnosis";
    case EventType::procedure: return "procedure";
    case EventType::admission: return "admission";
    case EventType::pharmacy: return "pharmacy";
  }
  return "diagnosis";
}

std::string_view to_string(Sex s) noexcept {
  switch (s) {
    case Sex::F: return "F";
    case Sex::M: return "M";
    case Sex::U: return "U";
  }
  return "U";
}

EventType parse_event_type(std::string_view s) {
  for (auto t : kAllEventTypes) {
    if (to_string(t) == s) return t;
  }
  throw Error(ErrorCode::config, "unknown event type '" + std::string(s) + "'");
}

Sex parse_sex(std::string_view s) {
  if (s == "F") return Sex::F;
  if (s == "M") return Sex::M;
  if (s == "U") return Sex::U;
  throw Error(ErrorCode::config, "unknown sex '" + std::string(s) + "'");
}

void PatientTimeline::sort_events() {
  std::stable_sort(events.begin(), events.end(),
                   [](const ClaimEvent& a, const ClaimEvent& b) { return a.event_date < b.event_date; });
}

void TargetSpec::validate() const {
  if (horizon_days < 1) throw Error(ErrorCode::config, "horizon_days must be >= 1");
  if (code_set.empty()) throw Error(ErrorCode::config, "target code_set must be non-empty");
}

Json Cohort::content() const {
  return Json{{"target_spec", target_spec}, {"rows", rows}};
}

Digest Cohort::compute_digest() const { return digest(canonical_encode_json(content())); }

bool ValidationReport::has(std::string_view kind) const {
  return std::any_of(violations.begin(), violations.end(),
                     [&](const Violation& v) { return v.kind == kind; });
}

ValidationReport validate_timeline(const PatientTimeline& t) {
  ValidationReport report;
  for (std::size_t i = 0; i < t.events.size(); ++i) {
    const auto& e = t.events[i];
    if (e.patient_id != t.patient_id) {
      report.violations.push_back({"patient_id_mismatch", i, e.patient_id});
    }
    if (e.event_date < t.birth_date) {
      report.violations.push_back({"event_before_birth", i, e.event_date.iso()});
    }
    if (i > 0 && e.event_date < t.events[i - 1].event_date) {
      report.violations.push_back({"unsorted_events", i, e.event_date.iso()});
    }
    if (e.code.empty()) report.violations.push_back({"empty_code", i, ""});
  }
  return report;
}

void to_json(Json& j, const Date& d) { j = d.iso(); }
void from_json(const Json& j, Date& d) { d = Date::parse(j.get_ref<const std::string&>()); }
void to_json(Json& j, const EventType& t) { j = std::string(to_string(t)); }
void from_json(const Json& j, EventType& t) { t = parse_event_type(j.get_ref<const std::string&>()); }
void to_json(Json& j, const Sex& s) { j = std::string(to_string(s)); }
void from_json(const Json& j, Sex& s) { s = parse_sex(j.get_ref<const std::string&>()); }

void to_json(Json& j, const ClaimEvent& e) {
  j = Json{{"patient_id", e.patient_id},
           {"event_date", e.event_date},
           {"event_type", e.event_type},
           {"code", e.code},
           {"source", e.source}};
  j["value"] = e.value ? Json(*e.value) : Json(nullptr);
}

void from_json(const Json& j, ClaimEvent& e) {
  e.patient_id = j.at("patient_id").get<std::string>();
  e.event_date = j.at("event_date").get<Date>();
  e.event_type = j.at("event_type").get<EventType>();
  e.code = j.at("code").get<std::string>();
  e.source = j.value("source", std::string{});
  auto v = j.find("value");
  if (v != j.end() && !v->is_null()) {
    e.value = v->get<double>();
  } else {
    e.value.reset();
  }
}

void to_json(Json& j, const PatientTimeline& t) {
  j = Json{{"patient_id", t.patient_id}, {"birth_date", t.birth_date}, {"sex", t.sex}, {"events", t.events}};
}

void from_json(const Json& j, PatientTimeline& t) {
  t.patient_id = j.at("patient_id").get<std::string>();
  t.birth_date = j.at("birth_date").get<Date>();
  t.sex = j.at("sex").get<Sex>();
  t.events = j.value("events", std::vector<ClaimEvent>{});
}

void to_json(Json& j, const TargetSpec& t) {
  j = Json{{"event_type", t.event_type}, {"code_set", t.code_set}, {"horizon_days", t.horizon_days}};
}

void from_json(const Json& j, TargetSpec& t) {
  t.event_type = j.at("event_type").get<EventType>();
  t.code_set = j.at("code_set").get<std::set<std::string>>();
  t.horizon_days = j.at("horizon_days").get<int>();
}

void to_json(Json& j, const CohortRow& r) {
  j = Json{{"patient_id", r.patient_id}, {"index_date", r.index_date}, {"label", r.label}};
}

void from_json(const Json& j, CohortRow& r) {
  r.patient_id = j.at("patient_id").get<std::string>();
  r.index_date = j.at("index_date").get<Date>();
  r.label = j.at("label").get<int>();
  if (r.label != 0 && r.label != 1) throw Error(ErrorCode::config, "cohort label must be 0 or 1");
}

void to_json(Json& j, const Cohort& c) {
  j = Json{{"cohort_id", c.cohort_id},
           {"target_spec", c.target_spec},
           {"rows", c.rows},
           {"data_digest", c.data_digest}};
}

void from_json(const Json& j, Cohort& c) {
  c.cohort_id = j.at("cohort_id").get<std::string>();
  c.target_spec = j.at("target_spec").get<TargetSpec>();
  c.rows = j.at("rows").get<std::vector<CohortRow>>();
  c.data_digest = j.at("data_digest").get<Digest>();
}

}  // namespace lm
