// SPDX-License-Identifier: Apache-2.0
#include "lm/ingest/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "lm/core/error.hpp"
#include "lm/core/random.hpp"

namespace lm::ingest {

namespace {

constexpr double kRiskGivenPlanted = 0.85;
constexpr double kRiskGivenBackground = 0.08;

std::string code_prefix(EventType t) {
  switch (t) {
    case EventType::diagnosis: return "DX-";
    case EventType::procedure: return "PX-";
    case EventType::admission: return "ADM-";
    case EventType::pharmacy: return "RX-";
  }
  return "X-";
}

std::string make_code(EventType t, int index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%03d", index);
  return code_prefix(t) + buf;
}

EventType draw_event_type(Rng& rng) {
  const double u = rng.uniform01();
  if (u < 0.45) return EventType::diagnosis;
  if (u < 0.70) return EventType::procedure;
  if (u < 0.92) return EventType::pharmacy;
  return EventType::admission;
}

std::optional<double> draw_value(Rng& rng, EventType t) {
  auto cents = [&](double lo, double hi) {
    return std::round((lo + (hi - lo) * rng.uniform01()) * 100.0) / 100.0;
  };
  switch (t) {
    case EventType::diagnosis: return std::nullopt;
    case EventType::procedure: return cents(50.0, 5000.0);
    case EventType::admission: return cents(1000.0, 30000.0);
    case EventType::pharmacy: return cents(5.0, 500.0);
  }
  return std::nullopt;
}

std::string patient_id_for(int i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "P%06d", i);
  return buf;
}

}  // namespace

void GeneratorConfig::validate() const {
  if (n_patients <= 0) throw Error(ErrorCode::config, "n_patients must be positive");
  if (!(mean_events_per_patient > 0.0)) {
    throw Error(ErrorCode::config, "mean_events_per_patient must be positive");
  }
  if (!(start_date < end_date)) throw Error(ErrorCode::config, "start_date must precede end_date");
  if (!(target_injection_rate >= 0.0 && target_injection_rate <= 1.0)) {
    throw Error(ErrorCode::config, "target_injection_rate must be in [0,1]");
  }
  for (auto t : kAllEventTypes) {
    auto it = code_vocabulary_sizes.find(t);
    if (it == code_vocabulary_sizes.end() || it->second <= 0) {
      throw Error(ErrorCode::config,
                  "code vocabulary size for " + std::string(to_string(t)) + " must be positive");
    }
  }
}

Date planted_reference_date(const GeneratorConfig& cfg) {
  return cfg.start_date.plus_days(days_between(cfg.start_date, cfg.end_date) / 2);
}

std::vector<PatientTimeline> generate_synthetic(const GeneratorConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  const auto span_days = days_between(cfg.start_date, cfg.end_date);
  const Date reference = planted_reference_date(cfg);

  std::vector<int> order(static_cast<std::size_t>(cfg.n_patients));
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(std::span<int>(order));
  const auto n_planted = static_cast<std::size_t>(std::llround(cfg.target_injection_rate * cfg.n_patients));
  std::vector<bool> planted(order.size(), false);
  for (std::size_t i = 0; i < n_planted; ++i) planted[static_cast<std::size_t>(order[i])] = true;

  std::vector<PatientTimeline> out;
  out.reserve(order.size());
  for (int i = 0; i < cfg.n_patients; ++i) {
    PatientTimeline t;
    t.patient_id = patient_id_for(i + 1);
    t.birth_date = cfg.start_date.plus_days(-rng.between(18 * 365, 90 * 365));
    const double s = rng.uniform01();
    t.sex = s < 0.48 ? Sex::F : (s < 0.96 ? Sex::M : Sex::U);

    auto add = [&](Date d, EventType type, std::string code, std::optional<double> value) {
      t.events.push_back(ClaimEvent{t.patient_id, d, type, std::move(code), value, "synthetic"});
    };

    const int n_events = rng.poisson(cfg.mean_events_per_patient);
    for (int k = 0; k < n_events; ++k) {
      const EventType type = draw_event_type(rng);
      const int vocab = cfg.code_vocabulary_sizes.at(type);
      // Squared uniform skews usage toward low-numbered codes.
      const double u = rng.uniform01();
      const int idx = std::min(vocab - 1, static_cast<int>(std::floor(vocab * u * u)));
      const Date d = cfg.start_date.plus_days(rng.between(0, span_days));
      add(d, type, make_code(type, idx), draw_value(rng, type));
    }

    const bool is_planted = planted[static_cast<std::size_t>(i)];
    if (is_planted) {
      if (rng.bernoulli(kRiskGivenPlanted)) {
        add(reference.plus_days(-rng.between(1, 180)), EventType::diagnosis, kRiskFactorCode, std::nullopt);
      }
      add(reference.plus_days(rng.between(1, 80)), EventType::admission, kUnplannedAdmissionCode,
          draw_value(rng, EventType::admission));
    } else if (rng.bernoulli(kRiskGivenBackground)) {
      add(cfg.start_date.plus_days(rng.between(0, span_days)), EventType::diagnosis, kRiskFactorCode,
          std::nullopt);
    }
    t.sort_events();
    out.push_back(std::move(t));
  }
  return out;
}

void to_json(Json& j, const GeneratorConfig& c) {
  Json vocab = Json::object();
  for (const auto& [t, n] : c.code_vocabulary_sizes) vocab[std::string(to_string(t))] = n;
  j = Json{{"seed", c.seed},
           {"n_patients", c.n_patients},
           {"mean_events_per_patient", c.mean_events_per_patient},
           {"date_range", Json::array({c.start_date, c.end_date})},
           {"code_vocabulary_sizes", vocab},
           {"target_injection_rate", c.target_injection_rate}};
}

void from_json(const Json& j, GeneratorConfig& c) {
  GeneratorConfig d;
  c.seed = j.value("seed", d.seed);
  c.n_patients = j.value("n_patients", d.n_patients);
  c.mean_events_per_patient = j.value("mean_events_per_patient", d.mean_events_per_patient);
  if (auto it = j.find("date_range"); it != j.end()) {
    c.start_date = it->at(0).get<Date>();
    c.end_date = it->at(1).get<Date>();
  }
  if (auto it = j.find("code_vocabulary_sizes"); it != j.end()) {
    c.code_vocabulary_sizes.clear();
    for (auto kv = it->begin(); kv != it->end(); ++kv) {
      c.code_vocabulary_sizes[parse_event_type(kv.key())] = kv.value().get<int>();
    }
  }
  c.target_injection_rate = j.value("target_injection_rate", d.target_injection_rate);
}

}  // namespace lm::ingest
