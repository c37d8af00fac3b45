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

#include "brflow/error.hpp"

namespace brflow {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kAllZero: return "AllZero";
    case ErrorCode::kNegativeValue: return "NegativeValue";
    case ErrorCode::kGridMismatch: return "GridMismatch";
    case ErrorCode::kDimUnsupported: return "DimUnsupported";
    case ErrorCode::kSupportViolation: return "SupportViolation";
    case ErrorCode::kNonpositiveSigma: return "NonpositiveSigma";
    case ErrorCode::kNonFinite: return "NonFinite";
    case ErrorCode::kConfigViolation: return "ConfigViolation";
    case ErrorCode::kNoConvergence: return "NoConvergence";
    case ErrorCode::kSolveFailure: return "SolveFailure";
    case ErrorCode::kInvalidSpec: return "InvalidSpec";
    case ErrorCode::kValidation: return "Validation";
    case ErrorCode::kIncompatibleRuns: return "IncompatibleRuns";
    case ErrorCode::kIo: return "Io";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message),
      code_(code),
      detail_(message) {}

void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace brflow
