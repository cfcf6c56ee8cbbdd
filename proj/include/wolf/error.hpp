// Copyright 2026 The Wolf Captioning Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace wolf {

enum class ErrorCode {
  kInvalidArgument,
  kInvalidLane,
  kLookup,
  kSchema,
  kInsufficientData,
  kCoincidentAgents,
  kBackendUnavailable,
  kAuthMissing,
  kFixtureMiss,
  kTransient,
  kInvalidVideo,
  kInvalidTrack,
  kPipeline,
  kPrecondition,
  kJudgeParse,
  kEvaluation,
  kUndefinedCorrelation,
  kIo,
};

std::string_view to_string(ErrorCode code);

/// Base exception for the library. Every failure carries a code so callers
/// and tests can tell error kinds apart without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace wolf
