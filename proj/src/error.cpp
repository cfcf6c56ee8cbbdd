// Copyright 2026 The Wolf Captioning Authors
// SPDX-License-Identifier: Apache-2.0

#include "wolf/error.hpp"

namespace wolf {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kInvalidLane: return "invalid-lane";
    case ErrorCode::kLookup: return "lookup";
    case ErrorCode::kSchema: return "schema";
    case ErrorCode::kInsufficientData: return "insufficient-data";
    case ErrorCode::kCoincidentAgents: return "coincident-agents";
    case ErrorCode::kBackendUnavailable: return "backend-unavailable";
    case ErrorCode::kAuthMissing: return "auth-missing";
    case ErrorCode::kFixtureMiss: return "fixture-miss";
    case ErrorCode::kTransient: return "transient";
    case ErrorCode::kInvalidVideo: return "invalid-video";
    case ErrorCode::kInvalidTrack: return "invalid-track";
    case ErrorCode::kPipeline: return "pipeline";
    case ErrorCode::kPrecondition: return "precondition";
    case ErrorCode::kJudgeParse: return "judge-parse";
    case ErrorCode::kEvaluation: return "evaluation";
    case ErrorCode::kUndefinedCorrelation: return "undefined-correlation";
    case ErrorCode::kIo: return "io";
  }
  return "unknown";
}

}  // namespace wolf
