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

// Joint optimization of a task function from demonstration videos: a
// temporal-frame-order loss that rewards instances whose geometric error
// shrinks over demonstrated time, and a cross-category cosine-similarity
// loss, blended by a one-step momentum update.

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "covgs/demo.hpp"
#include "covgs/neural.hpp"

namespace covgs {

struct StateChangeSample {
  std::size_t video = 0;
  std::size_t earlier = 0;  // position in DemoVideo::frames
  std::size_t later = 0;
};

struct TrainConfig {
  double alpha = 0.3;  // demonstrator confidence
  // LL errors are multiplied by this before entering the order loss.
  double ll_error_scale = 1.0;
  double beta = 0.9;   // momentum coefficient, strictly inside (0, 1)
  int outer_iters = 200;
  int temporal_steps = 10;
  int similarity_steps = 10;
  double lr_temporal = 3e-3;
  double lr_similarity = 3e-4;
  std::string optimizer = "adam";  // "adam" or "sgd"
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int batch_size = 32;
  int stride = 10;
  double tau = 1.0;
  int top_p = 1;
  std::uint64_t seed = 0;
  Hyperparams hyper;
  EnumerationLimits limits;
  int checkpoint_every = 0;  // outer iterations; 0 disables

  /// Throws ConfigError.
  void validate() const;
};

/// First-order update rule applied to a flat parameter vector.
class Optimizer {
 public:
  Optimizer(const TrainConfig& config, double lr, std::size_t size);
  void step(Eigen::VectorXd& theta, const Eigen::VectorXd& grad);

 private:
  bool adam_;
  double lr_, b1_, b2_, eps_;
  Eigen::VectorXd m_, v_;
  long t_ = 0;
};

/// Candidates of one frame with their geometric error norms and the index of
/// each candidate's encoder input in the owning video's slot table.
struct FrameCandidates {
  std::vector<InstanceRef> refs;
  std::vector<char> valid;
  std::vector<double> error_norm;
  std::vector<std::uint32_t> slot;
};

/// Distinct encoder inputs of a video. Descriptors are usually constant along
/// a feature track, so each instance is encoded once per step.
struct VideoSlots {
  std::vector<EncoderInput> inputs;
  std::vector<CanonicalKey> keys;
};

struct PreparedDataset {
  ConstraintType ctype = ConstraintType::kPointToPoint;
  std::vector<StateChangeSample> samples;                 // D_s
  std::vector<std::vector<FrameCandidates>> candidates;   // D_img, [video][frame]
  std::vector<VideoSlots> slots;                          // [video]
  std::vector<int> category;                              // [video]
};

/// Throws EmptyDataset when no video is long enough for `stride`.
PreparedDataset prepare_datasets(std::span<const DemoVideo> videos, int stride, ConstraintType ctype,
                                 const EnumerationLimits& limits, std::uint64_t seed);

/// -sum_G P(G) log sigmoid(alpha (|E_earlier(G)| - |E_later(G)|)), P the mean
/// of the two frames' selector softmax over candidates present in both.
/// Candidates present in only one frame, or degenerate in either, are skipped;
/// throws MissingCorrespondence if none remain.
double temporal_order_loss(const TaskFunctionParams& params, std::span<const GraphInstance> earlier,
                           std::span<const GraphInstance> later, double alpha, double tau);
GradientResult temporal_order_gradient(const TaskFunctionParams& params,
                                       std::span<const GraphInstance> earlier,
                                       std::span<const GraphInstance> later, double alpha, double tau);

using FramePair = std::pair<std::vector<GraphInstance>, std::vector<GraphInstance>>;

/// -(1/N) sum cos(zbar_i, zbar_j) with zbar the selector-weighted mean embedding.
double similarity_loss(const TaskFunctionParams& params, std::span<const FramePair> pairs, double tau);
GradientResult similarity_gradient(const TaskFunctionParams& params, std::span<const FramePair> pairs,
                                   double tau);

/// Cosine similarity with 1e-12 added to each norm. Throws ZeroNormEmbedding
/// when both operands are numerically zero.
double cosine_similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

TaskFunctionParams momentum_blend(const TaskFunctionParams& theta, const TaskFunctionParams& theta_sim,
                                  double beta);

/// Batched losses over a prepared dataset; mean over the batch.
GradientResult temporal_batch_gradient(const TaskFunctionParams& params, const PreparedDataset& data,
                                       std::span<const StateChangeSample> batch, double alpha, double tau);

struct SimilarityPair {
  std::size_t video_a, frame_a, video_b, frame_b;
};

GradientResult similarity_batch_gradient(const TaskFunctionParams& params, const PreparedDataset& data,
                                         std::span<const SimilarityPair> batch, double tau);

struct IterationMetrics {
  int outer_iter = 0;
  double temporal_loss = 0.0;
  double sim_loss = 0.0;
  double grad_norm = 0.0;
  double wall_ms = 0.0;
};

struct TrainResult {
  TaskFunctionParams params;
  std::vector<IterationMetrics> metrics;
  bool aborted = false;
  std::string abort_reason;
};

using CheckpointFn = std::function<void(int outer_iter, const TaskFunctionParams&)>;

/// Throws EmptyDataset when fewer than two categories are present.
TrainResult covgs_il(std::span<const DemoVideo> videos, const TrainConfig& config, ConstraintType ctype,
                     const CheckpointFn& checkpoint = {});

}  // namespace covgs
