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

// Batched forward/backward passes over candidate instances. The OpenMP
// kernels split work into fixed-size chunks whose partial gradients are
// summed in chunk order, so results do not depend on the thread count.
// The serial reference versions are kept for testing and benchmarking.

#pragma once

#include <Eigen/Core>
#include <span>

#include "covgs/neural.hpp"

namespace covgs::kernels {

inline constexpr std::size_t kReductionChunk = 16;

void forward_batch(const TaskFunctionParams& params, std::span<const EncoderInput> inputs,
                   std::span<ForwardTape> tapes, CandidateOutputs& out);

/// Empty entries in `dz` are treated as zero.
void backward_batch(const TaskFunctionParams& params, std::span<const ForwardTape> tapes,
                    std::span<const Eigen::VectorXd> dz, std::span<const double> dscore,
                    TaskFunctionParams& grad);

int max_threads();

}  // namespace covgs::kernels

namespace covgs::reference {

void forward_batch(const TaskFunctionParams& params, std::span<const EncoderInput> inputs,
                   std::span<ForwardTape> tapes, CandidateOutputs& out);

void backward_batch(const TaskFunctionParams& params, std::span<const ForwardTape> tapes,
                    std::span<const Eigen::VectorXd> dz, std::span<const double> dscore,
                    TaskFunctionParams& grad);

}  // namespace covgs::reference
