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

#include "covgs/kernels.hpp"

#include <algorithm>
#include <exception>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "covgs/errors.hpp"

namespace covgs {
namespace {

bool has_upstream(const Eigen::VectorXd& dz, double ds) {
  return ds != 0.0 || (dz.size() > 0 && !dz.isZero(0.0));
}

void check_sizes(std::size_t tapes, std::size_t dz, std::size_t ds) {
  if (tapes != dz || tapes != ds) {
    throw Error(ErrorKind::kShapeMismatch, "upstream gradient count does not match batch");
  }
}

}  // namespace

namespace kernels {

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void forward_batch(const TaskFunctionParams& params, std::span<const EncoderInput> inputs,
                   std::span<ForwardTape> tapes, CandidateOutputs& out) {
  const auto n = static_cast<std::ptrdiff_t>(inputs.size());
  out.z.assign(inputs.size(), Embedding());
  out.score.assign(inputs.size(), 0.0);
  std::exception_ptr failure;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      forward(params, inputs[i], tapes[i]);
      out.z[i] = tapes[i].z;
      out.score[i] = tapes[i].score;
    } catch (...) {
#pragma omp critical(covgs_forward_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
}

void backward_batch(const TaskFunctionParams& params, std::span<const ForwardTape> tapes,
                    std::span<const Eigen::VectorXd> dz, std::span<const double> dscore,
                    TaskFunctionParams& grad) {
  check_sizes(tapes.size(), dz.size(), dscore.size());
  const std::size_t chunks = (tapes.size() + kReductionChunk - 1) / kReductionChunk;
  std::vector<TaskFunctionParams> partial(chunks, TaskFunctionParams(params.hyper()));
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(params.hyper().embedding);
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(chunks); ++c) {
    const std::size_t lo = static_cast<std::size_t>(c) * kReductionChunk;
    const std::size_t hi = std::min(lo + kReductionChunk, tapes.size());
    for (std::size_t i = lo; i < hi; ++i) {
      if (!has_upstream(dz[i], dscore[i])) continue;
      backward(params, tapes[i], dz[i].size() ? dz[i] : zero, dscore[i], partial[c]);
    }
  }
  for (const auto& p : partial) grad.values() += p.values();
}

}  // namespace kernels

namespace reference {

void forward_batch(const TaskFunctionParams& params, std::span<const EncoderInput> inputs,
                   std::span<ForwardTape> tapes, CandidateOutputs& out) {
  out.z.clear();
  out.score.clear();
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    forward(params, inputs[i], tapes[i]);
    out.z.push_back(tapes[i].z);
    out.score.push_back(tapes[i].score);
  }
}

void backward_batch(const TaskFunctionParams& params, std::span<const ForwardTape> tapes,
                    std::span<const Eigen::VectorXd> dz, std::span<const double> dscore,
                    TaskFunctionParams& grad) {
  check_sizes(tapes.size(), dz.size(), dscore.size());
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(params.hyper().embedding);
  for (std::size_t i = 0; i < tapes.size(); ++i) {
    backward(params, tapes[i], dz[i].size() ? dz[i] : zero, dscore[i], grad);
  }
}

}  // namespace reference
}  // namespace covgs
