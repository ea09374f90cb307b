// SPDX-License-Identifier: Apache-2.0
#include "lm/ingest/cohort.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "lm/core/error.hpp"
#include "lm/core/random.hpp"

namespace lm::ingest {

namespace {

std::set<std::string> split_codes(std::string_view s) {
  std::set<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    auto comma = s.find(',', start);
    auto piece = s.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
    if (!piece.empty()) out.emplace(piece);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::optional<Date> index_date_for(const PatientTimeline& t, const IndexRule& rule) {
  if (const auto* fixed = std::get_if<FixedDate>(&rule)) {
    if (t.birth_date <= fixed->date) return fixed->date;
    return std::nullopt;
  }
  const auto& first = std::get<FirstEventOf>(rule);
  for (const auto& e : t.events) {
    if (e.event_type == first.event_type && first.code_set.count(e.code)) return e.event_date;
  }
  return std::nullopt;
}

Cohort finish(std::string id, TargetSpec target, std::vector<CohortRow> rows) {
  Cohort c;
  c.target_spec = std::move(target);
  c.rows = std::move(rows);
  std::sort(c.rows.begin(), c.rows.end(),
            [](const CohortRow& a, const CohortRow& b) { return a.patient_id < b.patient_id; });
  c.data_digest = c.compute_digest();
  c.cohort_id = id.empty() ? "c-" + c.data_digest.hex().substr(0, 12) : std::move(id);
  return c;
}

}  // namespace

IndexRule parse_index_rule(std::string_view text) {
  if (text.rfind("fixed:", 0) == 0) return FixedDate{Date::parse(text.substr(6))};
  if (text.rfind("first:", 0) == 0) {
    auto rest = text.substr(6);
    auto colon = rest.find(':');
    if (colon == std::string_view::npos) throw Error(ErrorCode::config, "index rule needs first:<type>:<codes>");
    FirstEventOf f{parse_event_type(rest.substr(0, colon)), split_codes(rest.substr(colon + 1))};
    if (f.code_set.empty()) throw Error(ErrorCode::config, "index rule code set is empty");
    return f;
  }
  throw Error(ErrorCode::config, "unrecognised index rule '" + std::string(text) + "'");
}

std::string describe(const IndexRule& rule) {
  if (const auto* fixed = std::get_if<FixedDate>(&rule)) return "fixed:" + fixed->date.iso();
  const auto& f = std::get<FirstEventOf>(rule);
  std::string s = "first:" + std::string(to_string(f.event_type)) + ":";
  bool first = true;
  for (const auto& c : f.code_set) {
    if (!first) s += ",";
    first = false;
    s += c;
  }
  return s;
}

int label_for(const PatientTimeline& t, Date index_date, const TargetSpec& target) {
  const Date horizon_end = index_date.plus_days(target.horizon_days);
  for (const auto& e : t.events) {
    if (e.event_date <= index_date) continue;
    if (e.event_date > horizon_end) break;
    if (target.matches(e)) return 1;
  }
  return 0;
}

Cohort build_cohort(std::span<const PatientTimeline> timelines, const TargetSpec& target,
                    const IndexRule& index_rule, std::string cohort_id) {
  target.validate();
  std::vector<CohortRow> rows;
  std::unordered_set<std::string> seen;
  for (const auto& t : timelines) {
    if (!seen.insert(t.patient_id).second) {
      throw Error(ErrorCode::config, "duplicate patient_id '" + t.patient_id + "' in cohort input");
    }
    auto index = index_date_for(t, index_rule);
    if (!index) continue;
    rows.push_back(CohortRow{t.patient_id, *index, label_for(t, *index, target)});
  }
  if (rows.empty()) throw Error(ErrorCode::empty_cohort, "no patient matches index rule " + describe(index_rule));
  return finish(std::move(cohort_id), target, std::move(rows));
}

std::pair<Cohort, Cohort> split_cohort(const Cohort& c, double train_fraction, double test_fraction,
                                       std::uint64_t seed) {
  if (!(train_fraction > 0.0) || !(test_fraction > 0.0) || std::abs(train_fraction + test_fraction - 1.0) > 1e-9) {
    throw Error(ErrorCode::config, "split fractions must be positive and sum to 1");
  }
  std::vector<CohortRow> rows = c.rows;
  std::sort(rows.begin(), rows.end(),
            [](const CohortRow& a, const CohortRow& b) { return a.patient_id < b.patient_id; });
  Rng rng(seed);
  rng.shuffle(std::span<CohortRow>(rows));
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(rows.size())));
  std::vector<CohortRow> train(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<CohortRow> test(rows.begin() + static_cast<std::ptrdiff_t>(n_train), rows.end());
  return {finish(c.cohort_id + "-train", c.target_spec, std::move(train)),
          finish(c.cohort_id + "-test", c.target_spec, std::move(test))};
}

}  // namespace lm::ingest
