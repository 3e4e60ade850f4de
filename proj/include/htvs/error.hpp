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

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace htvs {

enum class ErrorCode {
  kInvalidArgument,
  kTooFewSamples,
  kDegenerateCovariance,
  kNonFiniteInput,
  kBadDimension,
  kNonFiniteThreshold,
  kZeroTail,
  kLengthMismatch,
  kEmptyTable,
  kColumnMissing,
  kNoLabels,
  kParseError,
  kDuplicateColumn,
  kNonFiniteScore,
  kNotPositiveDefinite,
  kIoError,
};

std::string_view error_code_name(ErrorCode code);

// True for failures that stem from numerical breakdown rather than bad input.
bool is_numeric_failure(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Raised by the CSV reader; carries the 1-based line number of the offending row.
class ParseError : public Error {
 public:
  ParseError(ErrorCode code, long line, const std::string& reason);

  long line() const noexcept { return line_; }

 private:
  long line_;
};

}  // namespace htvs
