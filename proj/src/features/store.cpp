// SPDX-License-Identifier: Apache-2.0
#include "lm/features/store.hpp"

#include <algorithm>
#include <map>
#include <mutex>
#include <tuple>

#include "lm/core/error.hpp"

namespace lm::features {

std::string FeatureValueStore::cell_key(const std::string& patient_id, Date as_of) {
  std::string k;
  k.reserve(patient_id.size() + 12);
  k += patient_id;
  k += '\x1f';
  k += std::to_string(as_of.days_since_epoch());
  return k;
}

std::string FeatureValueStore::feature_key(const std::string& name, int version) {
  std::string k;
  k.reserve(name.size() + 6);
  k += name;
  k += '\x1f';
  k += std::to_string(version);
  return k;
}

void FeatureValueStore::insert_locked(FeatureValue v) {
  auto& cell = cells_[cell_key(v.patient_id, v.as_of_date)];
  auto fk = feature_key(v.feature_name, v.feature_version);
  auto it = cell.find(fk);
  if (it != cell.end()) {
    it->second = Entry{std::move(v), false};
    return;
  }
  auto name = v.feature_name;
  auto& entry = cell.emplace(std::move(fk), Entry{std::move(v), false}).first->second;
  entries_by_feature_[name].push_back(&entry);
  ++size_;
}

FeatureValueStore::FeatureValueStore(std::optional<std::filesystem::path> dir) {
  if (!dir) return;
  const auto file = *dir / "values.jsonl";
  read_jsonl(file, [&](const Json& j) {
    const auto& kind = j.at("kind").get_ref<const std::string&>();
    if (kind == "value") {
      insert_locked(j.at("record").get<FeatureValue>());
    } else if (kind == "stale") {
      apply_stale_locked(j.at("features").get<std::set<std::string>>(), nullptr);
    } else {
      throw Error(ErrorCode::corruption, "unknown feature store record kind '" + kind + "'");
    }
  });
  log_ = std::make_unique<JsonlAppender>(file);
}

const FeatureValueStore::Entry* FeatureValueStore::find_locked(const std::string& cell, const FeatureRef& ref) const {
  auto c = cells_.find(cell);
  if (c == cells_.end()) return nullptr;
  auto it = c->second.find(feature_key(ref.name, ref.version));
  return it == c->second.end() ? nullptr : &it->second;
}

std::optional<StoredValue> FeatureValueStore::get(const std::string& patient_id, const FeatureRef& ref,
                                                  Date as_of) const {
  const auto cell = cell_key(patient_id, as_of);
  std::shared_lock lock(mutex_);
  const Entry* e = find_locked(cell, ref);
  if (!e) return std::nullopt;
  return StoredValue{e->value.value, e->stale};
}

std::vector<std::optional<StoredValue>> FeatureValueStore::get_cell(const std::string& patient_id,
                                                                    const std::vector<FeatureRef>& refs,
                                                                    Date as_of) const {
  std::vector<std::optional<StoredValue>> out(refs.size());
  std::string fk;
  std::shared_lock lock(mutex_);
  auto c = cells_.find(cell_key(patient_id, as_of));
  if (c == cells_.end()) return out;
  for (std::size_t i = 0; i < refs.size(); ++i) {
    fk = refs[i].name;
    fk += '\x1f';
    fk += std::to_string(refs[i].version);
    auto it = c->second.find(fk);
    if (it != c->second.end()) out[i] = StoredValue{it->second.value.value, it->second.stale};
  }
  return out;
}

void FeatureValueStore::put(const std::vector<FeatureValue>& values) {
  if (values.empty()) return;
  std::vector<Json> records;
  if (log_) {
    records.reserve(values.size());
    for (const auto& v : values) records.push_back(Json{{"kind", "value"}, {"record", v}});
  }
  std::unique_lock lock(mutex_);
  if (log_) log_->append_all(records);
  for (const auto& v : values) insert_locked(v);
}

void FeatureValueStore::apply_stale_locked(const std::set<std::string>& names, std::size_t* flagged) {
  for (const auto& name : names) {
    auto it = entries_by_feature_.find(name);
    if (it == entries_by_feature_.end()) continue;
    for (Entry* e : it->second) {
      if (!e->stale && flagged) ++*flagged;
      e->stale = true;
    }
  }
}

std::size_t FeatureValueStore::mark_stale(const std::set<std::string>& feature_names) {
  std::unique_lock lock(mutex_);
  if (log_) log_->append(Json{{"kind", "stale"}, {"features", feature_names}});
  std::size_t flagged = 0;
  apply_stale_locked(feature_names, &flagged);
  return flagged;
}

std::size_t FeatureValueStore::size() const {
  std::shared_lock lock(mutex_);
  return size_;
}

std::size_t FeatureValueStore::stale_count() const {
  std::shared_lock lock(mutex_);
  std::size_t n = 0;
  for (const auto& [_, cell] : cells_)
    for (const auto& [__, e] : cell) n += e.stale;
  return n;
}

std::vector<FeatureValue> FeatureValueStore::snapshot() const {
  std::shared_lock lock(mutex_);
  std::map<std::tuple<std::string, std::string, int, Date>, const FeatureValue*> ordered;
  for (const auto& [_, cell] : cells_)
    for (const auto& [__, e] : cell)
      ordered.emplace(std::tuple(e.value.patient_id, e.value.feature_name, e.value.feature_version, e.value.as_of_date),
                      &e.value);
  std::vector<FeatureValue> out;
  out.reserve(ordered.size());
  for (const auto& [_, v] : ordered) out.push_back(*v);
  return out;
}

void to_json(Json& j, const FeatureValue& v) {
  j = Json{{"patient_id", v.patient_id},       {"feature_name", v.feature_name},
           {"feature_version", v.feature_version}, {"as_of_date", v.as_of_date},
           {"value", v.value},                 {"computed_at", v.computed_at}};
}

void from_json(const Json& j, FeatureValue& v) {
  v.patient_id = j.at("patient_id").get<std::string>();
  v.feature_name = j.at("feature_name").get<std::string>();
  v.feature_version = j.at("feature_version").get<int>();
  v.as_of_date = j.at("as_of_date").get<Date>();
  v.value = j.at("value").get<FeatureScalar>();
  v.computed_at = j.value("computed_at", std::string{});
}

}  // namespace lm::features
