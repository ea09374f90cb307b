// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "lm/core/types.hpp"

namespace lm::features {

using FeatureScalar = std::variant<double, std::string>;

enum class ValueType { numeric, categorical };

std::string_view to_string(ValueType t) noexcept;
ValueType parse_value_type(std::string_view s);
bool matches_type(const FeatureScalar& v, ValueType t) noexcept;

/// A patient's record cut at an as-of date: `events` holds only events dated
/// on or before `as_of`. Generators never see anything later.
struct TimelineView {
  const std::string& patient_id;
  Date birth_date;
  Sex sex;
  std::span<const ClaimEvent> events;
  Date as_of;
};

TimelineView view_as_of(const PatientTimeline& timeline, Date as_of);

/// Values of a feature's declared dependencies, keyed by dependency name.
using DependencyValues = std::map<std::string, FeatureScalar, std::less<>>;

/// Behavioral contract for feature generators. `compute` must be pure and
/// reentrant: its result depends only on the view, the params and the
/// dependency values.
class FeatureGenerator {
 public:
  virtual ~FeatureGenerator() = default;

  virtual std::string_view id() const = 0;
  virtual ValueType value_type() const { return ValueType::numeric; }
  /// Throws `Error(registration)` when a definition's params or dependency
  /// list cannot work with this generator.
  virtual void validate(const Json& params, const std::vector<std::string>& dependencies) const;
  virtual FeatureScalar compute(const TimelineView& timeline, const Json& params,
                                const DependencyValues& dependencies) const = 0;
};

class GeneratorRegistry {
 public:
  /// age_at_index, event_count_window, code_indicator, sex_indicator,
  /// value_sum_window, weighted_sum and sex_category.
  static GeneratorRegistry with_builtins();

  void add(std::shared_ptr<const FeatureGenerator> generator);
  const FeatureGenerator* find(std::string_view id) const;
  std::vector<std::string> ids() const;

 private:
  std::map<std::string, std::shared_ptr<const FeatureGenerator>, std::less<>> generators_;
};

void to_json(Json& j, const FeatureScalar& v);
void from_json(const Json& j, FeatureScalar& v);

}  // namespace lm::features

// FeatureScalar is a std::variant, so ADL cannot find the functions above.
template <>
struct nlohmann::adl_serializer<lm::features::FeatureScalar> {
  static void to_json(lm::Json& j, const lm::features::FeatureScalar& v) { lm::features::to_json(j, v); }
  static void from_json(const lm::Json& j, lm::features::FeatureScalar& v) { lm::features::from_json(j, v); }
};
