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

#include "covgs/errors.hpp"

namespace covgs {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kDegenerateLine: return "DegenerateLine";
    case ErrorKind::kTooFewFeatures: return "TooFewFeatures";
    case ErrorKind::kDimensionMismatch: return "DimensionMismatch";
    case ErrorKind::kNoValidCandidates: return "NoValidCandidates";
    case ErrorKind::kNonFiniteLoss: return "NonFiniteLoss";
    case ErrorKind::kMissingCorrespondence: return "MissingCorrespondence";
    case ErrorKind::kZeroNormEmbedding: return "ZeroNormEmbedding";
    case ErrorKind::kShapeMismatch: return "ShapeMismatch";
    case ErrorKind::kEmptyDataset: return "EmptyDataset";
    case ErrorKind::kSingularProbe: return "SingularProbe";
    case ErrorKind::kDegenerateStep: return "DegenerateStep";
    case ErrorKind::kDivergenceDetected: return "DivergenceDetected";
    case ErrorKind::kPlantFault: return "PlantFault";
    case ErrorKind::kBehindCamera: return "BehindCamera";
    case ErrorKind::kInfeasibleGoal: return "InfeasibleGoal";
    case ErrorKind::kMissingGroundTruth: return "MissingGroundTruth";
    case ErrorKind::kSeriesTooShort: return "SeriesTooShort";
    case ErrorKind::kConfig: return "ConfigError";
    case ErrorKind::kData: return "DataError";
    case ErrorKind::kIo: return "IoError";
  }
  return "Error";
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig:
      return kExitConfig;
    case ErrorKind::kNonFiniteLoss:
    case ErrorKind::kZeroNormEmbedding:
    case ErrorKind::kDivergenceDetected:
      return kExitNumeric;
    default:
      return kExitData;
  }
}

}  // namespace covgs
