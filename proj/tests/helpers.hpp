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

// Shared fixtures for the unit suites.

#pragma once

#include <random>
#include <vector>

#include "covgs/graphspec.hpp"
#include "covgs/neural.hpp"

namespace covgs::testing {

inline FeaturePoint feature(int id, double u, double v, int dim = 16, std::uint64_t seed = 0) {
  FeaturePoint f;
  f.id = id;
  f.coords = {u, v};
  std::mt19937_64 rng(seed * 1000003ULL + static_cast<std::uint64_t>(id));
  std::normal_distribution<double> n(0.0, 1.0);
  f.descriptor.resize(dim);
  for (int i = 0; i < dim; ++i) f.descriptor[i] = n(rng);
  return f;
}

/// m features with ids 0..m-1 at random image positions.
inline std::vector<FeaturePoint> random_features(int m, std::uint64_t seed, int dim = 16) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 640.0), v(0.0, 480.0);
  std::vector<FeaturePoint> out;
  for (int i = 0; i < m; ++i) {
    const double a = u(rng), b = v(rng);
    out.push_back(feature(i, a, b, dim, seed));
  }
  return out;
}

inline Hyperparams small_hyper(int dim = 4) {
  Hyperparams h;
  h.descriptor_dim = dim;
  h.hidden = 5;
  h.embedding = 3;
  h.rounds = 2;
  return h;
}

}  // namespace covgs::testing
