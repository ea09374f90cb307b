// SPDX-License-Identifier: Apache-2.0
#include "lm/training/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "lm/core/error.hpp"

namespace lm::training {

namespace {

void check_sizes(std::size_t a, std::size_t b) {
  if (a != b) throw Error(ErrorCode::metric, "scores and labels differ in length");
  if (a == 0) throw Error(ErrorCode::metric, "metric over an empty set");
}

}  // namespace

double auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  check_sizes(scores.size(), labels.size());
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Sum of midranks (1-based) of the positives.
  double positive_rank_sum = 0;
  std::size_t positives = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] == 1) {
        positive_rank_sum += midrank;
        ++positives;
      }
    }
    i = j;
  }
  const std::size_t negatives = n - positives;
  if (positives == 0 || negatives == 0) throw Error(ErrorCode::metric, "AUC needs both classes");
  const double p = static_cast<double>(positives), q = static_cast<double>(negatives);
  return (positive_rank_sum - p * (p + 1) / 2.0) / (p * q);
}

double brier(const std::vector<double>& probs, const std::vector<int>& labels) {
  check_sizes(probs.size(), labels.size());
  double sum = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double d = probs[i] - labels[i];
    sum += d * d;
  }
  return sum / static_cast<double>(probs.size());
}

double accuracy(const std::vector<double>& probs, const std::vector<int>& labels, double threshold) {
  check_sizes(probs.size(), labels.size());
  std::size_t correct = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) correct += (probs[i] > threshold ? 1 : 0) == labels[i];
  return static_cast<double>(correct) / static_cast<double>(probs.size());
}

}  // namespace lm::training
