// Copyright 2026 The brflow Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef BRFLOW_ERROR_HPP_
#define BRFLOW_ERROR_HPP_

#include <stdexcept>
#include <string>
#include <string_view>

namespace brflow {

enum class ErrorCode {
  kAllZero,
  kNegativeValue,
  kGridMismatch,
  kDimUnsupported,
  kSupportViolation,
  kNonpositiveSigma,
  kNonFinite,
  kConfigViolation,
  kNoConvergence,
  kSolveFailure,
  kInvalidSpec,
  kValidation,
  kIncompatibleRuns,
  kIo,
};

std::string_view to_string(ErrorCode code);

// All library failures are reported through this exception type. The code
// identifies the failure class; the message names the offending field or
// solver stage.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }
  // The message without the code prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

}  // namespace brflow

#endif  // BRFLOW_ERROR_HPP_
