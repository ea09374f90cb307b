// SPDX-License-Identifier: Apache-2.0
#include "lm/core/error.hpp"

namespace lm {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::config: return "config";
    case ErrorCode::encoding: return "encoding";
    case ErrorCode::mapping: return "mapping";
    case ErrorCode::empty_cohort: return "empty_cohort";
    case ErrorCode::registration: return "registration";
    case ErrorCode::cycle: return "cycle";
    case ErrorCode::not_found: return "not_found";
    case ErrorCode::feature_miss: return "feature_miss";
    case ErrorCode::spec: return "spec";
    case ErrorCode::integrity: return "integrity";
    case ErrorCode::corruption: return "corruption";
    case ErrorCode::transition: return "transition";
    case ErrorCode::no_model: return "no_model";
    case ErrorCode::serving: return "serving";
    case ErrorCode::degenerate_data: return "degenerate_data";
    case ErrorCode::calibration: return "calibration";
    case ErrorCode::metric: return "metric";
    case ErrorCode::profile: return "profile";
    case ErrorCode::auth: return "auth";
    case ErrorCode::insufficient_data: return "insufficient_data";
    case ErrorCode::pipeline: return "pipeline";
    case ErrorCode::io: return "io";
  }
  return "unknown";
}

namespace {
std::string miss_message(const std::vector<std::string>& missing) {
  std::string msg = "features not precomputed:";
  for (const auto& m : missing) msg += " " + m;
  return msg;
}
}  // namespace

FeatureMissError::FeatureMissError(std::vector<std::string> missing)
    : Error(ErrorCode::feature_miss, miss_message(missing)), missing_(std::move(missing)) {}

}  // namespace lm
