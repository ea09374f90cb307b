// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace lm {

enum class ErrorCode {
  config,
  encoding,
  mapping,
  empty_cohort,
  registration,
  cycle,
  not_found,
  feature_miss,
  spec,
  integrity,
  corruption,
  transition,
  no_model,
  serving,
  degenerate_data,
  calibration,
  metric,
  profile,
  auth,
  insufficient_data,
  pipeline,
  io,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Domain failure. Every module reports errors through this type; `code()` is
/// the stable machine-readable classification used by the CLI exit codes and
/// the HTTP status mapping.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Raised when a precomputed-only feature lookup cannot be satisfied.
class FeatureMissError : public Error {
 public:
  explicit FeatureMissError(std::vector<std::string> missing);
  const std::vector<std::string>& missing() const noexcept { return missing_; }

 private:
  std::vector<std::string> missing_;
};

/// Remote runner unreachable or misbehaving.
class ServingError : public Error {
 public:
  ServingError(const std::string& message, int retry_after_seconds)
      : Error(ErrorCode::serving, message), retry_after_(retry_after_seconds) {}
  int retry_after_seconds() const noexcept { return retry_after_; }

 private:
  int retry_after_;
};

/// Pipeline abort; `stage()` names the step that failed.
class PipelineError : public Error {
 public:
  PipelineError(std::string stage, ErrorCode cause, const std::string& message)
      : Error(ErrorCode::pipeline, message), stage_(std::move(stage)), cause_(cause) {}
  const std::string& stage() const noexcept { return stage_; }
  ErrorCode cause() const noexcept { return cause_; }

 private:
  std::string stage_;
  ErrorCode cause_;
};

}  // namespace lm
