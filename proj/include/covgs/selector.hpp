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

// Instance selectors shared by evaluation and the servo loop: the learned
// task function, a seeded random baseline and a ground-truth oracle.

#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <vector>

#include "covgs/demo.hpp"
#include "covgs/neural.hpp"

namespace covgs {

/// One chosen instance, bindings in canonical-key order, with its error.
struct Selected {
  GraphInstance instance;
  ErrorVector error;
};

class InstanceSelector {
 public:
  virtual ~InstanceSelector() = default;
  /// Top-ranked valid instance of `ctype` in `frame`. Throws NoValidCandidates.
  virtual Selected select(const Frame& frame, ConstraintType ctype) = 0;
};

/// Candidate refs of a frame with degenerate ones marked invalid.
struct ValidCandidates {
  std::vector<InstanceRef> refs;
  std::vector<char> valid;
};

ValidCandidates valid_candidates(const Frame& frame, ConstraintType ctype, const EnumerationLimits& limits);

class TaskFunctionSelector : public InstanceSelector {
 public:
  TaskFunctionSelector(std::map<ConstraintType, TaskFunctionParams> params, EnumerationLimits limits,
                       double tau = 1.0);

  Selected select(const Frame& frame, ConstraintType ctype) override;
  /// Full ranking; `top` holds at most `p` entries.
  SelectionResult rank(const Frame& frame, ConstraintType ctype, int p, ValidCandidates* out = nullptr);

  const TaskFunctionParams& params(ConstraintType ctype) const;

 private:
  std::map<ConstraintType, TaskFunctionParams> params_;
  std::map<ConstraintType, std::unique_ptr<EmbeddingCache>> caches_;
  EnumerationLimits limits_;
  double tau_;
};

/// Picks the valid candidate with the smallest seeded hash of its key. With
/// `per_frame` the hash also mixes in the frame index, so choices change from
/// frame to frame; otherwise the same instance wins whenever it is present.
class RandomSelector : public InstanceSelector {
 public:
  RandomSelector(std::uint64_t seed, EnumerationLimits limits, bool per_frame);
  Selected select(const Frame& frame, ConstraintType ctype) override;

 private:
  std::uint64_t seed_;
  EnumerationLimits limits_;
  bool per_frame_;
};

/// Returns the ground-truth instance whenever all its features are present.
class OracleSelector : public InstanceSelector {
 public:
  explicit OracleSelector(GroundTruth truth) : truth_(std::move(truth)) {}
  Selected select(const Frame& frame, ConstraintType ctype) override;

 private:
  GroundTruth truth_;
};

/// Sequential use of a selector over a frame stream. While features of the
/// previously selected instance are missing, the stream abstains for up to
/// `bridge_frames` consecutive frames before selecting afresh.
class SelectionStream {
 public:
  SelectionStream(InstanceSelector& selector, int bridge_frames) : selector_(selector), bridge_(bridge_frames) {}

  /// nullopt when abstaining or when the frame has no valid candidate.
  std::optional<Selected> next(const Frame& frame, ConstraintType ctype);
  void reset() { state_.clear(); }

 private:
  struct State {
    std::optional<CanonicalKey> last;
    int abstained = 0;
  };
  InstanceSelector& selector_;
  int bridge_;
  std::map<ConstraintType, State> state_;
};

/// True when every feature id of `key` is present in `frame`.
bool key_visible(const Frame& frame, const CanonicalKey& key, ConstraintType ctype);

/// Ground-truth instance present in the frame, if all its features are.
std::optional<GraphInstance> ground_truth_instance(const Frame& frame, const GroundTruth& truth,
                                                   ConstraintType ctype);

}  // namespace covgs
