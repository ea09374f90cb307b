// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "lm/features/catalog.hpp"

namespace lm::features {

/// Demographics, windowed utilization counts and costs, diagnosis history
/// indicators, the planted risk-factor indicator and two composite scores
/// (42 definitions, dependencies listed after what they depend on).
std::vector<FeatureDefinition> standard_feature_set();

/// Names of the numeric features of the standard set, in catalog order.
std::vector<std::string> standard_numeric_feature_names();

}  // namespace lm::features
