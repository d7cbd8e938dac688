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

// Serial reference kernels against the OpenMP batch kernels on a typical
// line-to-line candidate set.

#include <benchmark/benchmark.h>

#include <vector>

#include "covgs/kernels.hpp"
#include "covgs/rng.hpp"

namespace {

using covgs::ConstraintType;
using covgs::EncoderInput;

std::vector<EncoderInput> make_inputs(std::size_t count, ConstraintType ctype) {
  covgs::Rng rng(7);
  std::normal_distribution<double> n(0.0, 1.0);
  const int nodes = covgs::spec_for(ctype).node_count;
  std::vector<EncoderInput> out(count);
  for (auto& in : out) {
    in.ctype = ctype;
    in.descriptors.resize(16, nodes);
    for (int c = 0; c < nodes; ++c)
      for (int r = 0; r < 16; ++r) in.descriptors(r, c) = n(rng);
  }
  return out;
}

template <bool kParallel>
void BM_ForwardBackward(benchmark::State& state) {
  const auto params = covgs::TaskFunctionParams::random({}, 3);
  const auto inputs = make_inputs(static_cast<std::size_t>(state.range(0)), ConstraintType::kLineToLine);
  std::vector<covgs::ForwardTape> tapes(inputs.size());
  std::vector<Eigen::VectorXd> dz(inputs.size(), Eigen::VectorXd::Constant(16, 0.01));
  std::vector<double> ds(inputs.size(), 0.1);
  for (auto _ : state) {
    covgs::CandidateOutputs out;
    covgs::TaskFunctionParams grad(params.hyper());
    if constexpr (kParallel) {
      covgs::kernels::forward_batch(params, inputs, tapes, out);
      covgs::kernels::backward_batch(params, tapes, dz, ds, grad);
    } else {
      covgs::reference::forward_batch(params, inputs, tapes, out);
      covgs::reference::backward_batch(params, tapes, dz, ds, grad);
    }
    benchmark::DoNotOptimize(grad.values().data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
  state.counters["threads"] = kParallel ? covgs::kernels::max_threads() : 1;
}

BENCHMARK(BM_ForwardBackward<false>)->Name("reference/forward_backward")->Arg(64)->Arg(512);
BENCHMARK(BM_ForwardBackward<true>)->Name("openmp/forward_backward")->Arg(64)->Arg(512);

}  // namespace

BENCHMARK_MAIN();
