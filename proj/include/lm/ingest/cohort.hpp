// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <variant>

#include "lm/core/types.hpp"

namespace lm::ingest {

/// Index at the patient's earliest event of `event_type` whose code is in `code_set`.
struct FirstEventOf {
  EventType event_type = EventType::diagnosis;
  std::set<std::string> code_set;
};

/// Index every patient born on or before `date` at `date`.
struct FixedDate {
  Date date;
};

using IndexRule = std::variant<FirstEventOf, FixedDate>;

/// Parses `fixed:YYYY-MM-DD` or `first:<event_type>:<code>[,<code>...]`.
IndexRule parse_index_rule(std::string_view text);
std::string describe(const IndexRule& rule);

/// Label is 1 iff a target event falls in (index_date, index_date + horizon].
int label_for(const PatientTimeline& t, Date index_date, const TargetSpec& target);

/// One row per patient with an index date, rows ordered by patient_id. When
/// `cohort_id` is empty the id is derived from the data digest.
/// Throws `Error(empty_cohort)` when no patient gets an index date.
Cohort build_cohort(std::span<const PatientTimeline> timelines, const TargetSpec& target,
                    const IndexRule& index_rule, std::string cohort_id = {});

/// Patient-level split, deterministic in `seed`. The train part receives
/// round(train_fraction * n) rows. Sub-cohort ids are `<id>-train` / `<id>-test`.
std::pair<Cohort, Cohort> split_cohort(const Cohort& c, double train_fraction, double test_fraction,
                                       std::uint64_t seed);

}  // namespace lm::ingest
