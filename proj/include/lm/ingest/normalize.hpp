// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lm/core/types.hpp"

namespace lm::ingest {

struct RawSourceRecord {
  std::string source_name;
  std::map<std::string, std::string> payload;
};

/// Declares how one source's flat payload maps onto ClaimEvent. Exactly one of
/// the `code_keys` must be present in a record; which one fixes the event type.
struct SourceMapping {
  std::string source_name;
  std::string patient_key;
  std::string date_key;
  std::vector<std::pair<std::string, EventType>> code_keys;
  std::optional<std::string> value_key;
};

class SourceRegistry {
 public:
  /// Registry preloaded with the built-in `claims_v1` and `pharmacy_v1` mappings.
  static SourceRegistry with_builtins();

  void add(SourceMapping mapping);
  /// Throws `Error(mapping)` for unknown sources.
  const SourceMapping& at(const std::string& source_name) const;
  bool contains(const std::string& source_name) const { return mappings_.count(source_name) > 0; }

  /// Reads `[{source_name, patient_key, date_key, code_keys: {key: type}, value_key?}, ...]`.
  void load_json(const Json& mappings);

 private:
  std::map<std::string, SourceMapping> mappings_;
};

struct Reject {
  std::size_t index = 0;  // position in the input list
  std::string source_name;
  std::string reason;     // e.g. "missing_field:dt"
};

struct NormalizeResult {
  std::vector<ClaimEvent> events;  // ordered by (patient_id, event_date, code)
  std::vector<Reject> rejects;     // ordered by input index
};

/// Converts raw records into common-data-model events. Unknown sources throw
/// `Error(mapping)`; per-record problems land in `rejects`.
NormalizeResult normalize_to_cdm(const std::vector<RawSourceRecord>& records, const SourceRegistry& sources);

void to_json(Json& j, const RawSourceRecord& r);
void from_json(const Json& j, RawSourceRecord& r);
void to_json(Json& j, const Reject& r);

}  // namespace lm::ingest
