// SPDX-License-Identifier: Apache-2.0
#include "lm/ingest/normalize.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "lm/core/error.hpp"

namespace lm::ingest {

SourceRegistry SourceRegistry::with_builtins() {
  SourceRegistry r;
  r.add(SourceMapping{"claims_v1",
                      "pid",
                      "dt",
                      {{"dx", EventType::diagnosis},
                       {"px", EventType::procedure},
                       {"adm", EventType::admission},
                       {"rx", EventType::pharmacy}},
                      "amt"});
  r.add(SourceMapping{"pharmacy_v1", "member_id", "fill_date", {{"ndc", EventType::pharmacy}}, "paid"});
  return r;
}

void SourceRegistry::add(SourceMapping mapping) {
  if (mapping.source_name.empty() || mapping.patient_key.empty() || mapping.date_key.empty() ||
      mapping.code_keys.empty()) {
    throw Error(ErrorCode::mapping, "incomplete source mapping '" + mapping.source_name + "'");
  }
  auto name = mapping.source_name;
  mappings_.insert_or_assign(std::move(name), std::move(mapping));
}

const SourceMapping& SourceRegistry::at(const std::string& source_name) const {
  auto it = mappings_.find(source_name);
  if (it == mappings_.end()) throw Error(ErrorCode::mapping, "unknown source '" + source_name + "'");
  return it->second;
}

void SourceRegistry::load_json(const Json& mappings) {
  for (const auto& m : mappings) {
    SourceMapping s;
    s.source_name = m.at("source_name").get<std::string>();
    s.patient_key = m.at("patient_key").get<std::string>();
    s.date_key = m.at("date_key").get<std::string>();
    const auto& codes = m.at("code_keys");
    for (auto it = codes.begin(); it != codes.end(); ++it) {
      s.code_keys.emplace_back(it.key(), parse_event_type(it.value().get<std::string>()));
    }
    if (m.contains("value_key")) s.value_key = m.at("value_key").get<std::string>();
    add(std::move(s));
  }
}

namespace {

std::optional<double> parse_decimal(const std::string& s) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

}  // namespace

NormalizeResult normalize_to_cdm(const std::vector<RawSourceRecord>& records, const SourceRegistry& sources) {
  NormalizeResult result;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& rec = records[i];
    const SourceMapping& m = sources.at(rec.source_name);
    auto reject = [&](std::string reason) { result.rejects.push_back({i, rec.source_name, std::move(reason)}); };
    if (rec.payload.empty()) {
      reject("empty_payload");
      continue;
    }
    auto field = [&](const std::string& key) -> const std::string* {
      auto it = rec.payload.find(key);
      return it == rec.payload.end() || it->second.empty() ? nullptr : &it->second;
    };
    const std::string* pid = field(m.patient_key);
    if (!pid) {
      reject("missing_field:" + m.patient_key);
      continue;
    }
    const std::string* dt = field(m.date_key);
    if (!dt) {
      reject("missing_field:" + m.date_key);
      continue;
    }
    auto date = Date::try_parse(*dt);
    if (!date) {
      reject("invalid_date:" + m.date_key);
      continue;
    }
    const std::string* code = nullptr;
    EventType type = EventType::diagnosis;
    int code_fields = 0;
    for (const auto& [key, t] : m.code_keys) {
      if (const std::string* c = field(key)) {
        ++code_fields;
        code = c;
        type = t;
      }
    }
    if (code_fields == 0) {
      reject("missing_field:code");
      continue;
    }
    if (code_fields > 1) {
      reject("ambiguous_code");
      continue;
    }
    std::optional<double> value;
    if (m.value_key) {
      if (const std::string* v = field(*m.value_key)) {
        value = parse_decimal(*v);
        if (!value) {
          reject("invalid_value:" + *m.value_key);
          continue;
        }
      }
    }
    result.events.push_back(ClaimEvent{*pid, *date, type, *code, value, rec.source_name});
  }
  std::stable_sort(result.events.begin(), result.events.end(), [](const ClaimEvent& a, const ClaimEvent& b) {
    if (a.patient_id != b.patient_id) return a.patient_id < b.patient_id;
    if (a.event_date != b.event_date) return a.event_date < b.event_date;
    return a.code < b.code;
  });
  return result;
}

void to_json(Json& j, const RawSourceRecord& r) { j = Json{{"source_name", r.source_name}, {"payload", r.payload}}; }

void from_json(const Json& j, RawSourceRecord& r) {
  r.source_name = j.at("source_name").get<std::string>();
  r.payload.clear();
  const auto& p = j.at("payload");
  for (auto it = p.begin(); it != p.end(); ++it) {
    r.payload[it.key()] = it.value().is_string() ? it.value().get<std::string>() : it.value().dump();
  }
}

void to_json(Json& j, const Reject& r) {
  j = Json{{"index", r.index}, {"source_name", r.source_name}, {"reason", r.reason}};
}

}  // namespace lm::ingest
