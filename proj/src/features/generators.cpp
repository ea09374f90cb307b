// SPDX-License-Identifier: Apache-2.0
#include "lm/features/generators.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "lm/core/error.hpp"

namespace lm::features {

std::string_view to_string(ValueType t) noexcept {
  return t == ValueType::numeric ? "numeric" : "categorical";
}

ValueType parse_value_type(std::string_view s) {
  if (s == "numeric") return ValueType::numeric;
  if (s == "categorical") return ValueType::categorical;
  throw Error(ErrorCode::config, "unknown value type '" + std::string(s) + "'");
}

bool matches_type(const FeatureScalar& v, ValueType t) noexcept {
  return t == ValueType::numeric ? std::holds_alternative<double>(v) : std::holds_alternative<std::string>(v);
}

TimelineView view_as_of(const PatientTimeline& timeline, Date as_of) {
  auto end = std::upper_bound(timeline.events.begin(), timeline.events.end(), as_of,
                              [](Date d, const ClaimEvent& e) { return d < e.event_date; });
  return TimelineView{timeline.patient_id, timeline.birth_date, timeline.sex,
                      std::span<const ClaimEvent>(timeline.events.data(),
                                                  static_cast<std::size_t>(end - timeline.events.begin())),
                      as_of};
}

void FeatureGenerator::validate(const Json& params, const std::vector<std::string>& dependencies) const {
  if (!params.is_object()) throw Error(ErrorCode::registration, "params must be an object");
  if (!dependencies.empty()) {
    throw Error(ErrorCode::registration, std::string(id()) + " takes no dependencies");
  }
}

namespace {

[[noreturn]] void bad_params(std::string_view gen, const std::string& why) {
  throw Error(ErrorCode::registration, std::string(gen) + ": " + why);
}

int positive_int(const Json& params, const char* key, std::string_view gen) {
  auto it = params.find(key);
  if (it == params.end() || !it->is_number_integer() || it->get<long long>() < 1) {
    bad_params(gen, std::string("'") + key + "' must be a positive integer");
  }
  return it->get<int>();
}

std::string required_string(const Json& params, const char* key, std::string_view gen) {
  auto it = params.find(key);
  if (it == params.end() || !it->is_string() || it->get_ref<const std::string&>().empty()) {
    bad_params(gen, std::string("'") + key + "' must be a non-empty string");
  }
  return it->get<std::string>();
}

class AgeAtIndex final : public FeatureGenerator {
 public:
  std::string_view id() const override { return "age_at_index"; }
  FeatureScalar compute(const TimelineView& t, const Json&, const DependencyValues&) const override {
    return std::floor(static_cast<double>(days_between(t.birth_date, t.as_of)) / 365.25);
  }
};

class SexIndicator final : public FeatureGenerator {
 public:
  std::string_view id() const override { return "sex_indicator"; }
  FeatureScalar compute(const TimelineView& t, const Json&, const DependencyValues&) const override {
    return t.sex == Sex::F ? 1.0 : 0.0;
  }
};

class SexCategory final : public FeatureGenerator {
 public:
  std::string_view id() const override { return "sex_category"; }
  ValueType value_type() const override { return ValueType::categorical; }
  FeatureScalar compute(const TimelineView& t, const Json&, const DependencyValues&) const override {
    return std::string(to_string(t.sex));
  }
};

class CodeIndicator final : public FeatureGenerator {
 public:
  std::string_view id() const override { return "code_indicator"; }
  void validate(const Json& params, const std::vector<std::string>& deps) const override {
    FeatureGenerator::validate(params, deps);
    required_string(params, "code", id());
  }
  FeatureScalar compute(const TimelineView& t, const Json& params, const DependencyValues&) const override {
    const auto& code = params.at("code").get_ref<const std::string&>();
    for (const auto& e : t.events) {
      if (e.code == code) return 1.0;
    }
    return 0.0;
  }
};

/// Events of one type (optionally restricted to a code set) whose date falls
/// in the half-open window (as_of - window_days, as_of].
class WindowedEvents : public FeatureGenerator {
 public:
  void validate(const Json& params, const std::vector<std::string>& deps) const override {
    FeatureGenerator::validate(params, deps);
    parse_event_type(required_string(params, "event_type", id()));
    positive_int(params, "window_days", id());
    if (auto it = params.find("codes"); it != params.end()) {
      if (!it->is_array()) bad_params(id(), "'codes' must be an array of strings");
      for (const auto& c : *it) {
        if (!c.is_string()) bad_params(id(), "'codes' must be an array of strings");
      }
    }
  }

 protected:
  template <typename Fn>
  static void for_each_in_window(const TimelineView& t, const Json& params, Fn&& fn) {
    const EventType type = parse_event_type(params.at("event_type").get_ref<const std::string&>());
    const Date lower = t.as_of.plus_days(-params.at("window_days").get<int>());
    const Json* codes = nullptr;
    if (auto it = params.find("codes"); it != params.end() && !it->empty()) codes = &*it;
    auto first = std::upper_bound(t.events.begin(), t.events.end(), lower,
                                  [](Date d, const ClaimEvent& e) { return d < e.event_date; });
    for (auto it = first; it != t.events.end(); ++it) {
      if (it->event_type != type) continue;
      if (codes && std::find(codes->begin(), codes->end(), it->code) == codes->end()) continue;
      fn(*it);
    }
  }
};

class EventCountWindow final : public WindowedEvents {
 public:
  std::string_view id() const override { return "event_count_window"; }
  FeatureScalar compute(const TimelineView& t, const Json& params, const DependencyValues&) const override {
    double n = 0.0;
    for_each_in_window(t, params, [&](const ClaimEvent&) { n += 1.0; });
    return n;
  }
};

class ValueSumWindow final : public WindowedEvents {
 public:
  std::string_view id() const override { return "value_sum_window"; }
  FeatureScalar compute(const TimelineView& t, const Json& params, const DependencyValues&) const override {
    double sum = 0.0;
    for_each_in_window(t, params, [&](const ClaimEvent& e) { sum += e.value.value_or(0.0); });
    return sum;
  }
};

/// Linear combination of numeric dependencies: sum of weights[dep] * dep,
/// weights defaulting to 1.
class WeightedSum final : public FeatureGenerator {
 public:
  std::string_view id() const override { return "weighted_sum"; }
  void validate(const Json& params, const std::vector<std::string>& deps) const override {
    if (!params.is_object()) bad_params(id(), "params must be an object");
    if (deps.empty()) bad_params(id(), "needs at least one dependency");
    if (auto it = params.find("weights"); it != params.end()) {
      if (!it->is_object()) bad_params(id(), "'weights' must be an object");
      for (auto w = it->begin(); w != it->end(); ++w) {
        if (!w->is_number()) bad_params(id(), "weights must be numbers");
        if (std::find(deps.begin(), deps.end(), w.key()) == deps.end()) {
          bad_params(id(), "weight for undeclared dependency '" + w.key() + "'");
        }
      }
    }
  }
  FeatureScalar compute(const TimelineView&, const Json& params, const DependencyValues& deps) const override {
    double sum = 0.0;
    const Json* weights = nullptr;
    if (auto it = params.find("weights"); it != params.end()) weights = &*it;
    for (const auto& [name, value] : deps) {
      const double* v = std::get_if<double>(&value);
      if (!v) throw Error(ErrorCode::spec, "weighted_sum dependency '" + name + "' is not numeric");
      double w = 1.0;
      if (weights) {
        if (auto it = weights->find(name); it != weights->end()) w = it->get<double>();
      }
      sum += w * *v;
    }
    return sum;
  }
};

}  // namespace

GeneratorRegistry GeneratorRegistry::with_builtins() {
  GeneratorRegistry r;
  r.add(std::make_shared<AgeAtIndex>());
  r.add(std::make_shared<EventCountWindow>());
  r.add(std::make_shared<CodeIndicator>());
  r.add(std::make_shared<SexIndicator>());
  r.add(std::make_shared<ValueSumWindow>());
  r.add(std::make_shared<WeightedSum>());
  r.add(std::make_shared<SexCategory>());
  return r;
}

void GeneratorRegistry::add(std::shared_ptr<const FeatureGenerator> generator) {
  std::string id(generator->id());
  generators_.insert_or_assign(std::move(id), std::move(generator));
}

const FeatureGenerator* GeneratorRegistry::find(std::string_view id) const {
  auto it = generators_.find(id);
  return it == generators_.end() ? nullptr : it->second.get();
}

std::vector<std::string> GeneratorRegistry::ids() const {
  std::vector<std::string> out;
  for (const auto& [id, _] : generators_) out.push_back(id);
  return out;
}

void to_json(Json& j, const FeatureScalar& v) {
  if (const double* d = std::get_if<double>(&v)) {
    j = *d;
  } else {
    j = std::get<std::string>(v);
  }
}

void from_json(const Json& j, FeatureScalar& v) {
  if (j.is_number()) {
    v = j.get<double>();
  } else if (j.is_string()) {
    v = j.get<std::string>();
  } else {
    throw Error(ErrorCode::corruption, "feature value must be a number or a string");
  }
}

}  // namespace lm::features
