/*
 * Copyright 2026 The oodkit Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef OODKIT_ERROR_HPP_
#define OODKIT_ERROR_HPP_

#include <stdexcept>
#include <string>
#include <string_view>

namespace oodkit {

// Every failure the library can raise. The numeric values are stable: the
// command line tool exits with `kExitCodeBase + value`.
enum class ErrorCode : int {
  kIoFailure = 1,
  kMalformedHeader = 2,
  kRaggedRows = 3,
  kNonFiniteValue = 4,
  kDimensionOverflow = 5,
  kParseFailure = 6,
  kNegativeLabel = 7,
  kLabelOutOfRange = 8,
  kZeroRow = 9,
  kDimensionMismatch = 10,
  kEmptyRow = 11,
  kEmptyMatrix = 12,
  kTooFewClasses = 13,
  kBadN = 14,
  kNotSorted = 15,
  kInvalidConfig = 16,
  kSingleClassDataset = 17,
  kTooFewSamples = 18,
  kEmptySet = 19,
  kTooLarge = 20,
  kBadWorld = 21,
  kIllTrainedClassifier = 22,
  kDegenerateMixture = 23,
  kUsage = 24,
};

inline constexpr int kExitCodeBase = 10;

constexpr std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kIoFailure: return "IoFailure";
    case ErrorCode::kMalformedHeader: return "MalformedHeader";
    case ErrorCode::kRaggedRows: return "RaggedRows";
    case ErrorCode::kNonFiniteValue: return "NonFiniteValue";
    case ErrorCode::kDimensionOverflow: return "DimensionOverflow";
    case ErrorCode::kParseFailure: return "ParseFailure";
    case ErrorCode::kNegativeLabel: return "NegativeLabel";
    case ErrorCode::kLabelOutOfRange: return "LabelOutOfRange";
    case ErrorCode::kZeroRow: return "ZeroRow";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kEmptyRow: return "EmptyRow";
    case ErrorCode::kEmptyMatrix: return "EmptyMatrix";
    case ErrorCode::kTooFewClasses: return "TooFewClasses";
    case ErrorCode::kBadN: return "BadN";
    case ErrorCode::kNotSorted: return "NotSorted";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kSingleClassDataset: return "SingleClassDataset";
    case ErrorCode::kTooFewSamples: return "TooFewSamples";
    case ErrorCode::kEmptySet: return "EmptySet";
    case ErrorCode::kTooLarge: return "TooLarge";
    case ErrorCode::kBadWorld: return "BadWorld";
    case ErrorCode::kIllTrainedClassifier: return "IllTrainedClassifier";
    case ErrorCode::kDegenerateMixture: return "DegenerateMixture";
    case ErrorCode::kUsage: return "Usage";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(ErrorCodeName(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }
  int exit_code() const noexcept {
    return kExitCodeBase + static_cast<int>(code_);
  }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void Fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace oodkit

#endif  // OODKIT_ERROR_HPP_
