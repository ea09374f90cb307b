// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "lm/core/types.hpp"

namespace lm::training {

using Matrix = std::vector<std::vector<double>>;

struct Hyperparameters {
  double learning_rate = 0.1;
  int epochs = 30;
  double l2 = 0.001;
  int batch_size = 32;
  std::uint64_t seed = 7;

  /// Throws `Error(config)`.
  void validate() const;
};

struct LinearModel {
  double intercept = 0.0;
  std::vector<double> coefficients;

  double raw(const std::vector<double>& x) const;
  std::vector<double> raw(const Matrix& X) const;
};

struct Gradient {
  std::vector<double> w;
  double b = 0.0;
};

/// Mean logistic loss over `rows` (all rows when empty) plus (l2/2)·‖w‖².
double logistic_loss(const LinearModel& m, const Matrix& X, const std::vector<int>& y, double l2,
                     const std::vector<std::size_t>& rows = {});
/// (1/m)Σ(σ(w·x+b) − y)·x + l2·w over `rows` (all rows when empty).
Gradient logistic_gradient(const LinearModel& m, const Matrix& X, const std::vector<int>& y, double l2,
                           const std::vector<std::size_t>& rows = {});

/// Mini-batch gradient descent from w=0, b=0. Rows are reshuffled each epoch
/// with a generator seeded from `hp.seed`, so results are reproducible.
/// `on_epoch(epoch, full_loss)` runs after every epoch when set. Throws
/// `Error(degenerate_data)` for n < 2 or a single class.
LinearModel train_logreg(const Matrix& X, const std::vector<int>& y, const Hyperparameters& hp,
                         const std::function<void(int, double)>& on_epoch = {});

struct PlattFit {
  double a = 1.0;
  double b = 0.0;
  int iterations = 0;
};

/// Fits σ(a·s + b) to smoothed targets t₊=(N₊+1)/(N₊+2), t₋=1/(N₋+2) by
/// Newton's method with step halving; at most 100 iterations, stops when the
/// step is below 1e-8. Throws `Error(calibration)` with a single class.
PlattFit fit_platt(const std::vector<double>& scores, const std::vector<int>& labels);

struct FeatureImportance {
  std::size_t index = 0;
  std::string name;
  double importance = 0.0;
};

using Metric = std::function<double(const std::vector<double>&, const std::vector<int>&)>;

/// Baseline metric minus the mean metric after shuffling each column,
/// `repeats` times per column with seeded shuffles. Sorted by importance
/// descending, ties by column index.
std::vector<FeatureImportance> permutation_importance(const LinearModel& m, const Matrix& X, const std::vector<int>& y,
                                                      std::uint64_t seed, int repeats = 5,
                                                      const std::vector<std::string>& names = {},
                                                      const Metric& metric = {});

void to_json(Json& j, const Hyperparameters& hp);
void from_json(const Json& j, Hyperparameters& hp);
void to_json(Json& j, const FeatureImportance& f);

}  // namespace lm::training
