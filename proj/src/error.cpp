// Copyright 2026 The htvs-opt Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "htvs/error.hpp"

namespace htvs {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kTooFewSamples: return "TooFewSamples";
    case ErrorCode::kDegenerateCovariance: return "DegenerateCovariance";
    case ErrorCode::kNonFiniteInput: return "NonFiniteInput";
    case ErrorCode::kBadDimension: return "BadDimension";
    case ErrorCode::kNonFiniteThreshold: return "NonFiniteThreshold";
    case ErrorCode::kZeroTail: return "ZeroTail";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kEmptyTable: return "EmptyTable";
    case ErrorCode::kColumnMissing: return "ColumnMissing";
    case ErrorCode::kNoLabels: return "NoLabels";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kDuplicateColumn: return "DuplicateColumn";
    case ErrorCode::kNonFiniteScore: return "NonFiniteScore";
    case ErrorCode::kNotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::kIoError: return "IoError";
  }
  return "Unknown";
}

bool is_numeric_failure(ErrorCode code) {
  switch (code) {
    case ErrorCode::kDegenerateCovariance:
    case ErrorCode::kZeroTail:
      return true;
    default:
      return false;
  }
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(error_code_name(code)) + ": " + message), code_(code) {}

ParseError::ParseError(ErrorCode code, long line, const std::string& reason)
    : Error(code, "line " + std::to_string(line) + ": " + reason), line_(line) {}

}  // namespace htvs
