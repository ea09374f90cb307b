// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

namespace lm::training {

/// Probability that a random positive outranks a random negative, ties
/// counting one half. Midrank statistic, O(n log n). Throws `Error(metric)`
/// unless both classes are present.
double auc(const std::vector<double>& scores, const std::vector<int>& labels);

/// Mean squared error of probabilities against {0,1} labels.
double brier(const std::vector<double>& probs, const std::vector<int>& labels);

/// Fraction correct with the decision rule "1 iff p > threshold".
double accuracy(const std::vector<double>& probs, const std::vector<int>& labels, double threshold = 0.5);

}  // namespace lm::training
