// Copyright 2026 The covgs Authors
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

namespace covgs {

enum class ErrorKind {
  kDegenerateLine,
  kTooFewFeatures,
  kDimensionMismatch,
  kNoValidCandidates,
  kNonFiniteLoss,
  kMissingCorrespondence,
  kZeroNormEmbedding,
  kShapeMismatch,
  kEmptyDataset,
  kSingularProbe,
  kDegenerateStep,
  kDivergenceDetected,
  kPlantFault,
  kBehindCamera,
  kInfeasibleGoal,
  kMissingGroundTruth,
  kSeriesTooShort,
  kConfig,
  kData,
  kIo,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

// Process exit codes used by the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumeric = 4;

int exit_code_for(ErrorKind kind);

}  // namespace covgs
