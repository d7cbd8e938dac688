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

// Task function: message-passing encoder with GRU node updates followed by
// a relevance scorer, plus analytic reverse-mode gradients.

#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "covgs/graphspec.hpp"

namespace covgs {

struct Hyperparams {
  int descriptor_dim = 16;
  int hidden = 32;
  int embedding = 16;
  int rounds = 3;
  bool operator==(const Hyperparams&) const = default;
};

enum class ParamGroup : int {
  kInputW,
  kInputB,
  kInnerW,
  kInnerB,
  kOuterW,
  kOuterB,
  kGruWr,
  kGruUr,
  kGruBr,
  kGruWu,
  kGruUu,
  kGruBu,
  kGruWn,
  kGruUn,
  kGruBn,
  kGruBhn,
  kReadoutW1,
  kReadoutB1,
  kReadoutW2,
  kReadoutB2,
  kScorerW1,
  kScorerB1,
  kScorerW2,
  kScorerB2,
  kCount,
};

struct GroupShape {
  std::string_view name;
  int rows;
  int cols;
  std::size_t offset;
  bool is_bias;
};

/// All trainable arrays of one task function, stored contiguously. The same
/// type holds gradients and optimizer deltas.
class TaskFunctionParams {
 public:
  explicit TaskFunctionParams(const Hyperparams& hyper = {});

  /// Weights uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)], biases zero.
  static TaskFunctionParams random(const Hyperparams& hyper, std::uint64_t seed);

  const Hyperparams& hyper() const { return hyper_; }
  std::span<const GroupShape> groups() const { return groups_; }
  const GroupShape& group(ParamGroup g) const { return groups_[static_cast<int>(g)]; }

  Eigen::Map<Eigen::MatrixXd> mat(ParamGroup g);
  Eigen::Map<const Eigen::MatrixXd> mat(ParamGroup g) const;

  Eigen::VectorXd& values() { return values_; }
  const Eigen::VectorXd& values() const { return values_; }
  std::size_t size() const { return static_cast<std::size_t>(values_.size()); }

  bool same_shape(const TaskFunctionParams& other) const { return hyper_ == other.hyper_; }

 private:
  Hyperparams hyper_;
  std::vector<GroupShape> groups_;
  Eigen::VectorXd values_;
};

using Embedding = Eigen::VectorXd;

/// Descriptors of one instance's nodes as columns (D x node_count).
struct EncoderInput {
  ConstraintType ctype = ConstraintType::kPointToPoint;
  Eigen::MatrixXd descriptors;
};

EncoderInput encoder_input(const GraphInstance& instance);

/// Intermediate values of one forward pass, consumed by backward().
struct ForwardTape {
  ConstraintType ctype = ConstraintType::kPointToPoint;
  Eigen::MatrixXd x;
  Eigen::MatrixXd h0;
  struct Round {
    Eigen::MatrixXd h_prev, c_inner, c_outer, m, r, u, n, gh;
  };
  std::vector<Round> rounds;
  Eigen::VectorXd hbar, a, z, s1;
  double score = 0.0;
};

/// Runs encoder and scorer. Throws DimensionMismatch.
void forward(const TaskFunctionParams& params, const EncoderInput& input, ForwardTape& tape);

/// Accumulates d(loss)/d(params) into `grad` given upstream gradients on the
/// embedding and the score of one forward pass.
void backward(const TaskFunctionParams& params, const ForwardTape& tape, const Eigen::VectorXd& dz,
              double dscore, TaskFunctionParams& grad);

Embedding encode(const TaskFunctionParams& params, const GraphInstance& instance);
Embedding encode(const TaskFunctionParams& params, const EncoderInput& input);

double score(const TaskFunctionParams& params, const Embedding& z);

struct SelectionResult {
  std::vector<double> scores;         // -inf for invalid candidates
  std::vector<double> probabilities;  // 0 for invalid candidates
  std::vector<std::size_t> top;       // indices into the candidate list
};

/// Softmax of scores / tau over valid entries; invalid entries get 0.
std::vector<double> softmax(std::span<const double> scores, std::span<const char> valid, double tau);

/// Ranks candidates given precomputed scores; ties broken by canonical key.
SelectionResult select_from_scores(std::vector<double> scores, std::span<const char> valid,
                                   std::span<const CanonicalKey> keys, int p, double tau);

/// Candidates whose geometric error is degenerate are excluded.
/// Throws NoValidCandidates.
SelectionResult select(const TaskFunctionParams& params, std::span<const GraphInstance> candidates,
                       int p, double tau);

/// Per-candidate forward outputs handed to a loss head.
struct CandidateOutputs {
  std::vector<Embedding> z;
  std::vector<double> score;
};

/// Scalar loss and its gradient with respect to each candidate's outputs.
struct HeadGradient {
  double loss = 0.0;
  std::vector<Eigen::VectorXd> dz;
  std::vector<double> dscore;
};

using LossHead = std::function<HeadGradient(const CandidateOutputs&)>;

struct GradientResult {
  double loss = 0.0;
  TaskFunctionParams grad;
};

/// Exact gradient of a loss defined on the outputs of `batch`. Throws NonFiniteLoss.
GradientResult gradient(const TaskFunctionParams& params, std::span<const EncoderInput> batch,
                        const LossHead& head);

/// Memoizes (z, score) per instance; descriptors are compared so a key
/// re-bound to different descriptors is re-encoded.
class EmbeddingCache {
 public:
  explicit EmbeddingCache(const TaskFunctionParams& params) : params_(&params) {}

  struct Entry {
    Eigen::MatrixXd descriptors;
    Embedding z;
    double score;
  };

  const Entry& lookup(const GraphInstance& instance);
  const Entry& lookup(std::span<const FeaturePoint> features, ConstraintType ctype,
                      const InstanceRef& ref);

 private:
  const TaskFunctionParams* params_;
  std::unordered_map<CanonicalKey, std::deque<Entry>, CanonicalKeyHash> entries_;
};

}  // namespace covgs
