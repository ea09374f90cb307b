// SPDX-License-Identifier: Apache-2.0
#include "lm/monitoring/profile.hpp"

#include <algorithm>
#include <cmath>

#include "lm/core/canonical.hpp"
#include "lm/core/error.hpp"
#include "lm/core/jsonl.hpp"

namespace lm::monitoring {

namespace fs = std::filesystem;

std::size_t Histogram::bin_of(double x) const {
  return static_cast<std::size_t>(std::lower_bound(edges.begin(), edges.end(), x) - edges.begin());
}

std::vector<double> Histogram::proportions_of(const std::vector<double>& values) const {
  std::vector<double> counts(edges.size() + 1, 0.0);
  for (double v : values) counts[bin_of(v)] += 1;
  if (!values.empty())
    for (auto& c : counts) c /= static_cast<double>(values.size());
  return floor_and_renormalize(std::move(counts));
}

Histogram build_histogram(std::vector<double> values, int bins) {
  if (values.empty()) throw Error(ErrorCode::profile, "cannot build a histogram from no values");
  if (bins < 2) throw Error(ErrorCode::config, "histograms need at least 2 bins");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  Histogram h;
  for (int i = 1; i < bins; ++i) {
    // Nearest-rank quantile: smallest value with at least i/bins of the mass at or below it.
    const std::size_t rank = (static_cast<std::size_t>(i) * n + static_cast<std::size_t>(bins) - 1) /
                             static_cast<std::size_t>(bins);
    const double cut = values[std::max<std::size_t>(rank, 1) - 1];
    if (h.edges.empty() || cut > h.edges.back()) h.edges.push_back(cut);
  }
  h.proportions = h.proportions_of(values);
  return h;
}

std::vector<double> floor_and_renormalize(std::vector<double> p) {
  double sum = 0;
  for (auto& v : p) {
    v = std::max(v, kProportionFloor);
    sum += v;
  }
  for (auto& v : p) v /= sum;
  return p;
}

double psi(const std::vector<double>& reference, const std::vector<double>& current) {
  if (reference.size() != current.size() || reference.empty()) {
    throw Error(ErrorCode::metric, "PSI needs equal, non-zero bin counts");
  }
  const auto p = floor_and_renormalize(reference), q = floor_and_renormalize(current);
  double sum = 0;
  for (std::size_t i = 0; i < p.size(); ++i) sum += (q[i] - p[i]) * std::log(q[i] / p[i]);
  return sum;
}

ReferenceProfile build_profile(const std::string& model_id, int version,
                               const std::vector<std::pair<std::string, int>>& features,
                               const std::vector<std::vector<double>>& rows, const std::vector<double>& scores) {
  ReferenceProfile p;
  p.model_id = model_id;
  p.version = version;
  for (std::size_t j = 0; j < features.size(); ++j) {
    std::vector<double> column;
    column.reserve(rows.size());
    for (const auto& row : rows) column.push_back(row.at(j));
    p.features.push_back({features[j].first, features[j].second, build_histogram(std::move(column))});
  }
  p.score = build_histogram(scores);
  p.created_at = utc_timestamp_now();
  return p;
}

void save_profile(const fs::path& dir, const ReferenceProfile& profile) {
  const auto file = dir / profile.model_id / (std::to_string(profile.version) + ".json");
  fs::create_directories(file.parent_path());
  write_file_atomic(file, canonical_encode(profile));
}

ReferenceProfile load_profile(const fs::path& dir, const std::string& model_id, int version) {
  const auto file = dir / model_id / (std::to_string(version) + ".json");
  if (!fs::exists(file)) {
    throw Error(ErrorCode::profile, "no reference profile for " + model_id + " v" + std::to_string(version));
  }
  try {
    return Json::parse(read_file(file)).get<ReferenceProfile>();
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::corruption, "reference profile " + file.string() + " is unreadable: " + e.what());
  }
}

void to_json(Json& j, const Histogram& h) { j = Json{{"edges", h.edges}, {"proportions", h.proportions}}; }

void from_json(const Json& j, Histogram& h) {
  h.edges = j.at("edges").get<std::vector<double>>();
  h.proportions = j.at("proportions").get<std::vector<double>>();
}

void to_json(Json& j, const ReferenceProfile& p) {
  Json features = Json::array();
  for (const auto& f : p.features)
    features.push_back(Json{{"name", f.name}, {"version", f.version}, {"histogram", f.histogram}});
  j = Json{{"model_id", p.model_id},
           {"version", p.version},
           {"features", features},
           {"score", p.score},
           {"created_at", p.created_at}};
}

void from_json(const Json& j, ReferenceProfile& p) {
  p.model_id = j.at("model_id").get<std::string>();
  p.version = j.at("version").get<int>();
  p.features.clear();
  for (const auto& f : j.at("features"))
    p.features.push_back({f.at("name").get<std::string>(), f.at("version").get<int>(), f.at("histogram").get<Histogram>()});
  p.score = j.at("score").get<Histogram>();
  p.created_at = j.value("created_at", std::string{});
}

}  // namespace lm::monitoring
