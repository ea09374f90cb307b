// SPDX-License-Identifier: Apache-2.0
#include "lm/features/repository.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <thread>
#include <unordered_map>

#include "lm/core/canonical.hpp"
#include "lm/core/error.hpp"

namespace lm::features {

std::string_view to_string(FeaturePolicy p) noexcept {
  return p == FeaturePolicy::precomputed_only ? "precomputed_only" : "compute_on_miss";
}

FeaturePolicy parse_feature_policy(std::string_view s) {
  if (s == "precomputed_only") return FeaturePolicy::precomputed_only;
  if (s == "compute_on_miss") return FeaturePolicy::compute_on_miss;
  throw Error(ErrorCode::config, "unknown feature policy '" + std::string(s) + "'");
}

std::string_view to_string(EntryOrigin o) noexcept { return o == EntryOrigin::stored ? "stored" : "computed"; }

// Same bytes as canonical_encode_json({patient_id, as_of_date, entries}),
// written directly because every served request pays for it.
Digest FeatureVector::compute_digest() const {
  std::string out;
  out.reserve(64 + entries.size() * 40);
  out += "{\"as_of_date\":";
  append_canonical_string(out, as_of_date.iso());
  out += ",\"entries\":[";
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (i) out.push_back(',');
    out.push_back('[');
    append_canonical_string(out, entries[i].name);
    out.push_back(',');
    out += std::to_string(entries[i].version);
    out.push_back(',');
    if (const auto* d = std::get_if<double>(&entries[i].value)) {
      append_canonical_number(out, *d);
    } else {
      append_canonical_string(out, std::get<std::string>(entries[i].value));
    }
    out.push_back(']');
  }
  out += "],\"patient_id\":";
  append_canonical_string(out, patient_id);
  out.push_back('}');
  return digest(out);
}

std::vector<double> FeatureVector::numeric_values() const {
  std::vector<double> out;
  out.reserve(entries.size());
  for (const auto& e : entries) {
    const double* v = std::get_if<double>(&e.value);
    if (!v) throw Error(ErrorCode::spec, "feature '" + e.name + "' is categorical, expected numeric");
    out.push_back(*v);
  }
  return out;
}

FeatureRepository::FeatureRepository(std::optional<std::filesystem::path> data_root,
                                     std::shared_ptr<const GeneratorRegistry> generators)
    : generators_(generators ? std::move(generators)
                             : std::make_shared<const GeneratorRegistry>(GeneratorRegistry::with_builtins())),
      catalog_(generators_, data_root ? std::optional(*data_root / "catalog.jsonl") : std::nullopt),
      store_(data_root ? std::optional(*data_root / "features") : std::nullopt) {}

FeatureScalar FeatureRepository::evaluate_cell(
    const PatientTimeline& timeline, const FeatureDefinition& def, Date as_of,
    const std::function<FeatureScalar(const FeatureRef&)>& dependency_value) const {
  const FeatureGenerator* gen = generators_->find(def.generator_id);
  if (!gen) throw Error(ErrorCode::registration, "unknown generator '" + def.generator_id + "'");
  DependencyValues deps;
  for (const auto& d : def.dependency_refs) deps.emplace(d.name, dependency_value(d));
  FeatureScalar value = gen->compute(view_as_of(timeline, as_of), def.params, deps);
  if (!matches_type(value, def.value_type)) {
    throw Error(ErrorCode::spec, "generator '" + def.generator_id + "' returned a value of the wrong type");
  }
  if (const double* v = std::get_if<double>(&value); v && !std::isfinite(*v)) {
    throw Error(ErrorCode::spec, "generator '" + def.generator_id + "' returned a non-finite value");
  }
  return value;
}

namespace {

std::string run_key(const std::string& patient, const FeatureRef& ref, Date as_of) {
  return patient + '\x1f' + ref.name + '\x1f' + std::to_string(ref.version) + '\x1f' +
         std::to_string(as_of.days_since_epoch());
}

struct Task {
  std::size_t cell;
  const FeatureDefinition* def;
};

struct TaskOutcome {
  std::optional<FeatureScalar> value;
  std::string error;
};

}  // namespace

MaterializeReport FeatureRepository::materialize(const ingest::TimelineIndex& timelines,
                                                 const std::vector<FeatureRef>& refs, const std::vector<Cell>& requested,
                                                 unsigned threads) {
  MaterializeReport report;
  std::vector<Cell> cells;
  {
    std::set<std::pair<std::string, Date>> seen;
    for (const auto& c : requested)
      if (seen.emplace(c.patient_id, c.as_of).second) cells.push_back(c);
  }
  const auto stages = catalog_.resolve_execution_order(refs);
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());

  // Values produced earlier in this run, and cells that failed.
  std::unordered_map<std::string, FeatureScalar> produced;
  std::unordered_map<std::string, std::string> failed;
  const std::string now = utc_timestamp_now();

  for (const auto& stage : stages) {
    std::vector<Task> tasks;
    for (const auto& ref : stage) {
      const FeatureDefinition& def = catalog_.get(ref);
      for (std::size_t c = 0; c < cells.size(); ++c) {
        auto stored = store_.get(cells[c].patient_id, ref, cells[c].as_of);
        if (stored && !stored->stale) {
          ++report.skipped;
          continue;
        }
        tasks.push_back({c, &def});
      }
    }
    if (tasks.empty()) continue;

    std::vector<TaskOutcome> outcomes(tasks.size());
    auto run_range = [&](std::size_t begin, std::size_t end) {
      for (std::size_t i = begin; i < end; ++i) {
        const Cell& cell = cells[tasks[i].cell];
        const FeatureDefinition& def = *tasks[i].def;
        try {
          const PatientTimeline& timeline = timelines.at(cell.patient_id);
          auto dep_value = [&](const FeatureRef& dep) -> FeatureScalar {
            const auto k = run_key(cell.patient_id, dep, cell.as_of);
            if (auto it = produced.find(k); it != produced.end()) return it->second;
            if (auto it = failed.find(k); it != failed.end()) {
              throw Error(ErrorCode::spec, "dependency " + dep.label() + " failed: " + it->second);
            }
            auto stored = store_.get(cell.patient_id, dep, cell.as_of);
            if (!stored || stored->stale) {
              throw Error(ErrorCode::spec, "dependency " + dep.label() + " unavailable");
            }
            return stored->value;
          };
          outcomes[i].value = evaluate_cell(timeline, def, cell.as_of, dep_value);
        } catch (const std::exception& e) {
          outcomes[i].error = e.what();
        }
      }
    };

    const std::size_t workers = std::min<std::size_t>(threads, tasks.size());
    if (workers <= 1) {
      run_range(0, tasks.size());
    } else {
      std::vector<std::thread> pool;
      const std::size_t chunk = (tasks.size() + workers - 1) / workers;
      for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t begin = w * chunk, end = std::min(tasks.size(), begin + chunk);
        if (begin < end) pool.emplace_back(run_range, begin, end);
      }
      for (auto& t : pool) t.join();
    }

    std::vector<FeatureValue> batch;
    batch.reserve(tasks.size());
    for (std::size_t i = 0; i < tasks.size(); ++i) {
      const Cell& cell = cells[tasks[i].cell];
      const FeatureRef ref = tasks[i].def->ref();
      const auto k = run_key(cell.patient_id, ref, cell.as_of);
      if (outcomes[i].value) {
        produced.emplace(k, *outcomes[i].value);
        batch.push_back(FeatureValue{cell.patient_id, ref.name, ref.version, cell.as_of, *outcomes[i].value, now});
      } else {
        failed.emplace(k, outcomes[i].error);
        report.failures.push_back({cell.patient_id, ref, cell.as_of, outcomes[i].error});
      }
    }
    store_.put(batch);
    report.written += batch.size();
  }
  return report;
}

MaterializeReport FeatureRepository::materialize(const ingest::TimelineIndex& timelines,
                                                 const std::vector<std::string>& names,
                                                 const std::vector<Date>& as_of_dates, unsigned threads) {
  std::vector<Cell> cells;
  for (const auto& t : timelines.all())
    for (auto d : as_of_dates) cells.push_back({t.patient_id, d});
  return materialize(timelines, catalog_.resolve_latest(names), cells, threads);
}

std::set<std::string> FeatureRepository::mark_stale(const std::string& feature_name) {
  auto affected = catalog_.dependents_closure(feature_name);
  store_.mark_stale(affected);
  return affected;
}

FeatureScalar FeatureRepository::compute_recursive(const PatientTimeline& timeline, const FeatureRef& ref, Date as_of,
                                                   bool* computed) const {
  if (auto stored = store_.get(timeline.patient_id, ref, as_of); stored && !stored->stale) return stored->value;
  *computed = true;
  const FeatureDefinition& def = catalog_.get(ref);
  bool ignored = false;
  return evaluate_cell(timeline, def, as_of,
                       [&](const FeatureRef& dep) { return compute_recursive(timeline, dep, as_of, &ignored); });
}

VectorResult FeatureRepository::get_vector_asof(const ingest::TimelineSource& timelines, const std::string& patient_id,
                                                const std::vector<FeatureRef>& refs, Date as_of,
                                                FeaturePolicy policy) const {
  for (const auto& r : refs) {
    if (!catalog_.contains(r)) throw Error(ErrorCode::not_found, "feature " + r.label() + " is not cataloged");
  }
  VectorResult result;
  result.vector.patient_id = patient_id;
  result.vector.as_of_date = as_of;
  result.vector.entries.reserve(refs.size());
  result.origins.reserve(refs.size());
  std::vector<std::string> missing;
  std::shared_ptr<const PatientTimeline> timeline;  // fetched on the first miss only
  const auto cell = store_.get_cell(patient_id, refs, as_of);
  for (std::size_t i = 0; i < refs.size(); ++i) {
    const auto& ref = refs[i];
    const auto& stored = cell[i];
    if (stored && !stored->stale) {
      result.vector.entries.push_back({ref.name, ref.version, stored->value});
      result.origins.push_back(EntryOrigin::stored);
      continue;
    }
    if (policy == FeaturePolicy::precomputed_only) {
      missing.push_back(ref.name);
      continue;
    }
    if (!timeline) timeline = timelines.fetch(patient_id);
    bool computed = false;
    result.vector.entries.push_back({ref.name, ref.version, compute_recursive(*timeline, ref, as_of, &computed)});
    result.origins.push_back(EntryOrigin::computed);
  }
  if (!missing.empty()) throw FeatureMissError(std::move(missing));
  result.vector.vector_digest = result.vector.compute_digest();
  return result;
}

void to_json(Json& j, const FeatureEntry& e) {
  j = Json::array({e.name, e.version, e.value});
}
void from_json(const Json& j, FeatureEntry& e) {
  e.name = j.at(0).get<std::string>();
  e.version = j.at(1).get<int>();
  e.value = j.at(2).get<FeatureScalar>();
}

void to_json(Json& j, const FeatureVector& v) {
  j = Json{{"patient_id", v.patient_id},
           {"as_of_date", v.as_of_date},
           {"entries", v.entries},
           {"vector_digest", v.vector_digest}};
}

void from_json(const Json& j, FeatureVector& v) {
  v.patient_id = j.at("patient_id").get<std::string>();
  v.as_of_date = j.at("as_of_date").get<Date>();
  v.entries = j.at("entries").get<std::vector<FeatureEntry>>();
  v.vector_digest = j.value("vector_digest", Digest{});
}

}  // namespace lm::features
