// SPDX-License-Identifier: Apache-2.0
#include "lm/ingest/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>

#include "lm/core/canonical.hpp"
#include "lm/core/error.hpp"
#include "lm/core/jsonl.hpp"

namespace lm::ingest {

namespace fs = std::filesystem;

TimelineIndex::TimelineIndex(std::vector<PatientTimeline> timelines) : timelines_(std::move(timelines)) {
  by_id_.reserve(timelines_.size());
  for (std::size_t i = 0; i < timelines_.size(); ++i) {
    if (!by_id_.emplace(timelines_[i].patient_id, i).second) {
      throw Error(ErrorCode::config, "duplicate patient '" + timelines_[i].patient_id + "'");
    }
  }
}

const PatientTimeline* TimelineIndex::find(std::string_view patient_id) const {
  auto it = by_id_.find(std::string(patient_id));
  return it == by_id_.end() ? nullptr : &timelines_[it->second];
}

const PatientTimeline& TimelineIndex::at(std::string_view patient_id) const {
  const auto* t = find(patient_id);
  if (!t) throw Error(ErrorCode::not_found, "unknown patient '" + std::string(patient_id) + "'");
  return *t;
}

std::shared_ptr<const PatientTimeline> TimelineIndex::fetch(std::string_view patient_id) const {
  return {std::shared_ptr<const PatientTimeline>(), &at(patient_id)};
}

namespace {

std::vector<fs::path> event_shards(const fs::path& dir) {
  std::vector<fs::path> shards;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (name.rfind("events-", 0) == 0 && entry.path().extension() == ".jsonl") shards.push_back(entry.path());
  }
  std::sort(shards.begin(), shards.end());
  return shards;
}

}  // namespace

DatasetTimelineSource::DatasetTimelineSource(const fs::path& dir) : shards_(event_shards(dir)) {
  if (!fs::exists(dir / "patients.jsonl")) {
    throw Error(ErrorCode::not_found, "no patients.jsonl under " + dir.string());
  }
  read_jsonl(dir / "patients.jsonl", [&](const Json& j) {
    PatientTimeline t;
    t.patient_id = j.at("patient_id").get<std::string>();
    t.birth_date = j.at("birth_date").get<Date>();
    t.sex = j.at("sex").get<Sex>();
    auto id = t.patient_id;
    patients_.emplace(std::move(id), Located{std::move(t), {}});
  });
  for (std::uint32_t s = 0; s < shards_.size(); ++s) {
    std::ifstream in(shards_[s], std::ios::binary);
    std::string line;
    std::uint64_t offset = 0;
    while (std::getline(in, line)) {
      const std::uint64_t length = line.size() + 1;
      if (!line.empty()) {
        const auto pid = Json::parse(line).at("patient_id").get<std::string>();
        auto it = patients_.find(pid);
        if (it == patients_.end()) throw Error(ErrorCode::config, "event for patient '" + pid + "' without demographics");
        auto& ranges = it->second.ranges;
        // Events of one patient are usually contiguous, so ranges merge.
        if (!ranges.empty() && ranges.back().shard == s && ranges.back().offset + ranges.back().length == offset) {
          ranges.back().length += length;
        } else {
          ranges.push_back({s, offset, length});
        }
      }
      offset += length;
    }
  }
}

std::shared_ptr<const PatientTimeline> DatasetTimelineSource::fetch(std::string_view patient_id) const {
  auto it = patients_.find(std::string(patient_id));
  if (it == patients_.end()) throw Error(ErrorCode::not_found, "unknown patient '" + std::string(patient_id) + "'");
  auto t = std::make_shared<PatientTimeline>(it->second.demographics);
  std::string buf;
  for (const auto& r : it->second.ranges) {
    std::ifstream in(shards_[r.shard], std::ios::binary);
    in.seekg(static_cast<std::streamoff>(r.offset));
    buf.resize(r.length);
    in.read(buf.data(), static_cast<std::streamsize>(r.length));
    if (in.gcount() != static_cast<std::streamsize>(r.length)) {
      throw Error(ErrorCode::io, "short read in " + shards_[r.shard].string());
    }
    std::size_t start = 0;
    while (start < buf.size()) {
      auto end = buf.find('\n', start);
      if (end == std::string::npos) end = buf.size();
      if (end > start) t->events.push_back(Json::parse(buf.begin() + start, buf.begin() + end).get<ClaimEvent>());
      start = end + 1;
    }
  }
  t->sort_events();
  return t;
}

void write_events(const fs::path& file, std::span<const ClaimEvent> events) {
  std::vector<Json> lines;
  lines.reserve(events.size());
  for (const auto& e : events) lines.emplace_back(e);
  write_jsonl(file, lines);
}

void write_timelines(const fs::path& dir, std::span<const PatientTimeline> timelines, std::size_t events_per_shard) {
  fs::create_directories(dir);
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (name.rfind("events-", 0) == 0 && entry.path().extension() == ".jsonl") fs::remove(entry.path());
  }
  std::vector<Json> patients;
  std::vector<Json> shard;
  int shard_no = 0;
  auto flush = [&] {
    char name[32];
    std::snprintf(name, sizeof name, "events-%04d.jsonl", shard_no++);
    write_jsonl(dir / name, shard);
    shard.clear();
  };
  for (const auto& t : timelines) {
    patients.push_back(Json{{"patient_id", t.patient_id}, {"birth_date", t.birth_date}, {"sex", t.sex}});
    for (const auto& e : t.events) {
      shard.emplace_back(e);
      if (shard.size() >= events_per_shard) flush();
    }
  }
  if (!shard.empty() || shard_no == 0) flush();
  write_jsonl(dir / "patients.jsonl", patients);
}

std::vector<PatientTimeline> load_timelines(const fs::path& dir) {
  if (!fs::exists(dir / "patients.jsonl")) {
    throw Error(ErrorCode::not_found, "no patients.jsonl under " + dir.string());
  }
  std::vector<PatientTimeline> out;
  std::unordered_map<std::string, std::size_t> by_id;
  read_jsonl(dir / "patients.jsonl", [&](const Json& j) {
    PatientTimeline t;
    t.patient_id = j.at("patient_id").get<std::string>();
    t.birth_date = j.at("birth_date").get<Date>();
    t.sex = j.at("sex").get<Sex>();
    by_id.emplace(t.patient_id, out.size());
    out.push_back(std::move(t));
  });
  for (const auto& shard : event_shards(dir)) {
    read_jsonl(shard, [&](const Json& j) {
      auto e = j.get<ClaimEvent>();
      auto it = by_id.find(e.patient_id);
      if (it == by_id.end()) {
        throw Error(ErrorCode::config, "event for patient '" + e.patient_id + "' without demographics");
      }
      out[it->second].events.push_back(std::move(e));
    });
  }
  for (auto& t : out) t.sort_events();
  return out;
}

namespace {
fs::path cohort_file(const fs::path& dir, const std::string& id, const char* ext) {
  return dir / ("cohort-" + id + ext);
}
}  // namespace

void write_cohort(const fs::path& dir, const Cohort& cohort) {
  std::vector<Json> lines;
  lines.reserve(cohort.rows.size() + 1);
  lines.push_back(Json{{"cohort_id", cohort.cohort_id},
                       {"target_spec", cohort.target_spec},
                       {"data_digest", cohort.data_digest},
                       {"row_count", cohort.rows.size()}});
  for (const auto& r : cohort.rows) lines.emplace_back(r);
  write_jsonl(cohort_file(dir, cohort.cohort_id, ".jsonl"), lines);
  write_file_atomic(cohort_file(dir, cohort.cohort_id, ".digest"), cohort.data_digest.hex() + "\n");
}

Cohort load_cohort(const fs::path& dir, const std::string& cohort_id) {
  const auto path = cohort_file(dir, cohort_id, ".jsonl");
  if (!fs::exists(path)) throw Error(ErrorCode::not_found, "unknown cohort '" + cohort_id + "'");
  Cohort c;
  bool header = true;
  std::size_t expected_rows = 0;
  read_jsonl(path, [&](const Json& j) {
    if (header) {
      c.cohort_id = j.at("cohort_id").get<std::string>();
      c.target_spec = j.at("target_spec").get<TargetSpec>();
      c.data_digest = j.at("data_digest").get<Digest>();
      expected_rows = j.at("row_count").get<std::size_t>();
      header = false;
      return;
    }
    c.rows.push_back(j.get<CohortRow>());
  });
  std::string sidecar = read_file(cohort_file(dir, cohort_id, ".digest"));
  while (!sidecar.empty() && (sidecar.back() == '\n' || sidecar.back() == '\r')) sidecar.pop_back();
  if (c.rows.size() != expected_rows || sidecar != c.data_digest.hex() || c.compute_digest() != c.data_digest) {
    throw Error(ErrorCode::corruption, "cohort '" + cohort_id + "' does not match its digest");
  }
  return c;
}

std::vector<std::string> list_cohorts(const fs::path& dir) {
  std::vector<std::string> ids;
  if (!fs::exists(dir)) return ids;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (name.rfind("cohort-", 0) == 0 && entry.path().extension() == ".jsonl") {
      ids.push_back(name.substr(7, name.size() - 7 - 6));
    }
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

}  // namespace lm::ingest
