// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "lm/core/types.hpp"

namespace lm::ingest {

/// Diagnosis code planted as the risk factor for the injected target events.
inline constexpr const char* kRiskFactorCode = "DX-RISK";
/// Admission code of the injected target event.
inline constexpr const char* kUnplannedAdmissionCode = "ADM-UNPLANNED";

struct GeneratorConfig {
  std::uint64_t seed = 42;
  int n_patients = 2000;
  double mean_events_per_patient = 14.0;
  Date start_date = Date::from_ymd(2018, 1, 1);
  Date end_date = Date::from_ymd(2021, 12, 31);
  std::map<EventType, int> code_vocabulary_sizes = {{EventType::diagnosis, 40},
                                                    {EventType::procedure, 25},
                                                    {EventType::admission, 4},
                                                    {EventType::pharmacy, 30}};
  double target_injection_rate = 0.3;

  void validate() const;
};

/// Date around which injected patients are built: the risk-factor diagnosis
/// falls in the 180 days before it and the unplanned admission in the 80 days
/// after it. A fixed-date cohort indexed here with a 90-day horizon recovers
/// the planted signal.
Date planted_reference_date(const GeneratorConfig& cfg);

/// Deterministic in `cfg`: identical configs produce identical timelines on
/// every platform.
std::vector<PatientTimeline> generate_synthetic(const GeneratorConfig& cfg);

void to_json(Json& j, const GeneratorConfig& c);
void from_json(const Json& j, GeneratorConfig& c);

}  // namespace lm::ingest
