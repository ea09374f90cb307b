// SPDX-License-Identifier: Apache-2.0
#include "lm/features/standard_set.hpp"

#include <cstdio>

#include "lm/ingest/synthetic.hpp"

namespace lm::features {

namespace {
FeatureDefinition def(std::string name, std::string generator, Json params = Json::object(),
                      std::vector<std::string> deps = {}, std::optional<std::string> group = std::nullopt,
                      ValueType type = ValueType::numeric) {
  FeatureDefinition d;
  d.name = std::move(name);
  d.generator_id = std::move(generator);
  d.params = std::move(params);
  d.dependencies = std::move(deps);
  d.group_id = std::move(group);
  d.value_type = type;
  return d;
}
}  // namespace

std::vector<FeatureDefinition> standard_feature_set() {
  std::vector<FeatureDefinition> out;
  out.push_back(def("age_at_index", "age_at_index", Json::object(), {}, "demographics"));
  out.push_back(def("sex_indicator", "sex_indicator", Json::object(), {}, "demographics"));
  out.push_back(def("sex_category", "sex_category", Json::object(), {}, "demographics", ValueType::categorical));
  out.push_back(def("risk_factor_indicator", "code_indicator", Json{{"code", ingest::kRiskFactorCode}}));
  for (auto type : kAllEventTypes) {
    for (int window : {30, 90, 180, 365, 730}) {
      out.push_back(def(std::string(to_string(type)) + "_count_" + std::to_string(window) + "d",
                        "event_count_window",
                        Json{{"event_type", std::string(to_string(type))}, {"window_days", window}}, {},
                        "counts_" + std::string(to_string(type))));
    }
  }
  for (auto type : {EventType::procedure, EventType::admission, EventType::pharmacy}) {
    for (int window : {90, 365}) {
      out.push_back(def(std::string(to_string(type)) + "_cost_" + std::to_string(window) + "d", "value_sum_window",
                        Json{{"event_type", std::string(to_string(type))}, {"window_days", window}}, {}, "costs"));
    }
  }
  for (int i = 0; i < 10; ++i) {
    char code[16], name[32];
    std::snprintf(code, sizeof code, "DX-%03d", i);
    std::snprintf(name, sizeof name, "dx_%03d_history", i);
    out.push_back(def(name, "code_indicator", Json{{"code", code}}, {}, "dx_history"));
  }
  out.push_back(def("utilization_score", "weighted_sum",
                    Json{{"weights", {{"admission_count_365d", 2.0},
                                      {"procedure_count_365d", 1.0},
                                      {"diagnosis_count_365d", 0.5}}}},
                    {"admission_count_365d", "procedure_count_365d", "diagnosis_count_365d"}));
  out.push_back(def("comorbidity_index", "weighted_sum",
                    Json{{"weights", {{"dx_000_history", 1.0},
                                      {"dx_001_history", 1.0},
                                      {"dx_002_history", 2.0},
                                      {"dx_003_history", 2.0},
                                      {"dx_004_history", 3.0}}}},
                    {"dx_000_history", "dx_001_history", "dx_002_history", "dx_003_history", "dx_004_history"}));
  return out;
}

std::vector<std::string> standard_numeric_feature_names() {
  std::vector<std::string> names;
  for (const auto& d : standard_feature_set())
    if (d.value_type == ValueType::numeric) names.push_back(d.name);
  return names;
}

}  // namespace lm::features
