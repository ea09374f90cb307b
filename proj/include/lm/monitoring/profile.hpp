// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "lm/core/types.hpp"

namespace lm::monitoring {

inline constexpr double kProportionFloor = 1e-4;
inline constexpr int kDefaultBins = 10;

/// Equal-frequency histogram. `edges` are the interior cut points with
/// duplicates removed; bin i covers (edges[i-1], edges[i]], the last bin is
/// open above, so there are edges.size() + 1 bins.
struct Histogram {
  std::vector<double> edges;
  std::vector<double> proportions;

  std::size_t bin_of(double x) const;
  /// Proportions of `values` in these bins, floored and renormalized.
  std::vector<double> proportions_of(const std::vector<double>& values) const;
};

/// Cut points at the i/bins quantiles (nearest rank) of `values`.
Histogram build_histogram(std::vector<double> values, int bins = kDefaultBins);

/// Raises every proportion to at least 1e-4, then rescales to sum 1.
std::vector<double> floor_and_renormalize(std::vector<double> p);

/// Population stability index Σ(qᵢ − pᵢ)·ln(qᵢ/pᵢ) after flooring both
/// sides. Throws `Error(metric)` on a bin count mismatch.
double psi(const std::vector<double>& reference, const std::vector<double>& current);

struct FeatureProfile {
  std::string name;
  int version = 0;
  Histogram histogram;
};

struct ReferenceProfile {
  std::string model_id;
  int version = 0;
  std::vector<FeatureProfile> features;  // in the model's feature order
  Histogram score;
  std::string created_at;
};

/// Profile from the training matrix (rows aligned with `names`) and the
/// training-set probabilities.
ReferenceProfile build_profile(const std::string& model_id, int version,
                               const std::vector<std::pair<std::string, int>>& features,
                               const std::vector<std::vector<double>>& rows, const std::vector<double>& scores);

/// `<dir>/<model_id>/<version>.json`
void save_profile(const std::filesystem::path& dir, const ReferenceProfile& profile);
/// Throws `Error(profile)` when absent.
ReferenceProfile load_profile(const std::filesystem::path& dir, const std::string& model_id, int version);

void to_json(Json& j, const Histogram& h);
void from_json(const Json& j, Histogram& h);
void to_json(Json& j, const ReferenceProfile& p);
void from_json(const Json& j, ReferenceProfile& p);

}  // namespace lm::monitoring
