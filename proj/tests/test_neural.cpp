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

#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "covgs/errors.hpp"
#include "covgs/neural.hpp"
#include "helpers.hpp"

using namespace covgs;
using covgs::testing::random_features;

namespace {

GraphInstance random_instance(ConstraintType t, std::uint64_t seed, int dim = 16) {
  const int n = spec_for(t).node_count;
  auto feats = random_features(n, seed, dim);
  return make_instance(t, feats);
}

// loss = sum_i w_i . z_i + c_i score_i^2
LossHead quadratic_head(std::uint64_t seed, int dim, std::size_t n) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::vector<Eigen::VectorXd> w(n);
  std::vector<double> c(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = Eigen::VectorXd::NullaryExpr(dim, [&] { return g(rng); });
    c[i] = g(rng);
  }
  return [w, c](const CandidateOutputs& o) {
    HeadGradient h;
    for (std::size_t i = 0; i < o.z.size(); ++i) {
      h.loss += w[i].dot(o.z[i]) + c[i] * o.score[i] * o.score[i];
      h.dz.push_back(w[i]);
      h.dscore.push_back(2.0 * c[i] * o.score[i]);
    }
    return h;
  };
}

}  // namespace

TEST_SUITE("neural") {

TEST_CASE("parameter layout") {
  const Hyperparams h;
  TaskFunctionParams p(h);
  std::size_t total = 0;
  for (const auto& g : p.groups()) total += static_cast<std::size_t>(g.rows * g.cols);
  CHECK(total == p.size());
  CHECK(p.groups().size() == static_cast<std::size_t>(ParamGroup::kCount));
  const auto r = TaskFunctionParams::random(h, 3);
  for (const auto& g : r.groups()) {
    const auto block = r.values().segment(static_cast<Eigen::Index>(g.offset), g.rows * g.cols);
    if (g.is_bias) CHECK(block.norm() == 0.0);
    else CHECK(block.cwiseAbs().maxCoeff() <= 1.0 / std::sqrt(static_cast<double>(g.cols)));
  }
  CHECK(r.values() == TaskFunctionParams::random(h, 3).values());
  CHECK(r.values() != TaskFunctionParams::random(h, 4).values());
}

TEST_CASE("permutation invariance under automorphisms") {
  for (int draw = 0; draw < 100; ++draw) {
    const auto params = TaskFunctionParams::random(Hyperparams{}, 1000 + draw);
    for (auto t : kAllConstraintTypes) {
      const auto inst = random_instance(t, 7 * draw + 1);
      const Embedding z = encode(params, inst);
      for (const auto& perm : spec_for(t).automorphisms) {
        CHECK((encode(params, permuted(inst, perm)) - z).cwiseAbs().maxCoeff() <= 1e-6);
      }
    }
  }
}

TEST_CASE("determinism and coordinate independence") {
  const auto params = TaskFunctionParams::random(Hyperparams{}, 5);
  auto inst = random_instance(ConstraintType::kLineToLine, 9);
  const Embedding z1 = encode(params, inst);
  const Embedding z2 = encode(params, inst);
  CHECK(z1 == z2);
  CHECK(score(params, z1) == score(params, z2));
  for (auto& b : inst.bindings) {
    b.coords.u += 13.5;
    b.coords.v -= 2.25;
  }
  CHECK(encode(params, inst) == z1);
}

TEST_CASE("zero descriptors with zero biases") {
  auto params = TaskFunctionParams::random(Hyperparams{}, 8);
  for (const auto& g : params.groups()) {
    if (g.is_bias) params.values().segment(static_cast<Eigen::Index>(g.offset), g.rows * g.cols).setZero();
  }
  auto a = random_instance(ConstraintType::kPointToPoint, 1);
  auto b = random_instance(ConstraintType::kPointToPoint, 2);
  for (auto* inst : {&a, &b}) {
    for (auto& f : inst->bindings) f.descriptor.setZero();
  }
  CHECK(encode(params, a) == encode(params, b));
  TaskFunctionParams zero(Hyperparams{});
  CHECK(score(zero, Embedding::Zero(16)) == 0.0);
}

TEST_CASE("dimension mismatch") {
  const auto params = TaskFunctionParams::random(Hyperparams{}, 1);
  const auto inst = random_instance(ConstraintType::kPointToPoint, 1, 8);
  CHECK_THROWS_AS(encode(params, inst), Error);
  CHECK_THROWS_AS(score(params, Embedding::Zero(3)), Error);
}

TEST_CASE("softmax and selection") {
  const std::vector<double> eq{0.3, 0.3, 0.3, 0.3};
  const std::vector<char> all(4, 1);
  for (double p : softmax(eq, all, 1.0)) CHECK(p == doctest::Approx(0.25));
  const std::vector<double> s{2, 1, 0};
  const std::vector<char> v3(3, 1);
  const auto cold = softmax(s, v3, 1e-3);
  CHECK(cold[0] == doctest::Approx(1.0));
  CHECK(cold[2] == doctest::Approx(0.0));
  const std::vector<char> mask{1, 0, 1};
  const auto masked = softmax(s, mask, 1.0);
  CHECK(masked[1] == 0.0);
  CHECK(masked[0] + masked[2] == doctest::Approx(1.0).epsilon(1e-12));

  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0, 3);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> sc(9);
    for (auto& x : sc) x = g(rng);
    const std::vector<char> ok(9, 1);
    const auto pr = softmax(sc, ok, 0.7);
    CHECK(std::accumulate(pr.begin(), pr.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-9));
    for (int i = 0; i < 9; ++i) {
      for (int j = 0; j < 9; ++j) {
        if (sc[i] > sc[j]) CHECK(pr[i] >= pr[j]);
      }
    }
  }

  std::vector<CanonicalKey> keys(3);
  keys[0].ids = {5, 6, -1, -1};
  keys[1].ids = {1, 2, -1, -1};
  keys[2].ids = {3, 4, -1, -1};
  const auto r = select_from_scores({1.0, 1.0, 0.5}, v3, keys, 2, 1.0);
  REQUIRE(r.top.size() == 2);
  CHECK(r.top[0] == 1);
  CHECK(r.top[1] == 0);
  const auto r5 = select_from_scores({1.0, 1.0, 0.5}, v3, keys, 5, 1.0);
  CHECK(r5.top.size() == 3);
}

TEST_CASE("select over instances") {
  const auto params = TaskFunctionParams::random(Hyperparams{}, 2);
  const std::vector<GraphInstance> one{random_instance(ConstraintType::kPointToPoint, 4)};
  const auto r = select(params, one, 1, 1.0);
  CHECK(r.probabilities[0] == doctest::Approx(1.0));
  CHECK(r.top == std::vector<std::size_t>{0});
  using covgs::testing::feature;
  const std::vector<GraphInstance> degenerate{make_instance(
      ConstraintType::kLineToLine, {feature(1, 1, 1), feature(2, 1, 1), feature(3, 0, 0), feature(4, 5, 0)})};
  try {
    select(params, degenerate, 1, 1.0);
    FAIL("expected NoValidCandidates");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kNoValidCandidates);
  }
}

TEST_CASE("gradient matches central differences for every group") {
  const Hyperparams h;
  const auto params = TaskFunctionParams::random(h, 21);
  std::vector<EncoderInput> batch;
  batch.push_back(encoder_input(random_instance(ConstraintType::kPointToPoint, 31)));
  batch.push_back(encoder_input(random_instance(ConstraintType::kLineToLine, 32)));
  batch.push_back(encoder_input(random_instance(ConstraintType::kPointToLine, 33)));
  const auto head = quadratic_head(4, h.embedding, batch.size());
  const auto res = gradient(params, batch, head);
  auto loss_at = [&](const TaskFunctionParams& p) {
    CandidateOutputs o;
    for (const auto& in : batch) {
      o.z.push_back(encode(p, in));
      o.score.push_back(score(p, o.z.back()));
    }
    return head(o).loss;
  };
  const double eps = 1e-5;
  TaskFunctionParams pp = params;
  for (const auto& g : params.groups()) {
    const Eigen::Index off = static_cast<Eigen::Index>(g.offset), n = g.rows * g.cols;
    Eigen::VectorXd fd(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double x = pp.values()[off + i];
      pp.values()[off + i] = x + eps;
      const double up = loss_at(pp);
      pp.values()[off + i] = x - eps;
      const double dn = loss_at(pp);
      pp.values()[off + i] = x;
      fd[i] = (up - dn) / (2 * eps);
    }
    const Eigen::VectorXd an = res.grad.values().segment(off, n);
    const double rel = (an - fd).norm() / std::max({an.norm(), fd.norm(), 1e-10});
    INFO("group " << g.name);
    CHECK(rel < 1e-4);
  }
}

TEST_CASE("constant loss has zero gradient") {
  const auto params = TaskFunctionParams::random(Hyperparams{}, 2);
  std::vector<EncoderInput> batch{encoder_input(random_instance(ConstraintType::kPointToPoint, 3))};
  const auto res = gradient(params, batch, [](const CandidateOutputs& o) {
    HeadGradient h;
    h.loss = 4.0;
    h.dz.assign(o.z.size(), Eigen::VectorXd::Zero(o.z[0].size()));
    h.dscore.assign(o.z.size(), 0.0);
    return h;
  });
  CHECK(res.loss == 4.0);
  CHECK(res.grad.values().norm() == 0.0);
  CHECK_THROWS_AS(gradient(params, batch,
                           [](const CandidateOutputs& o) {
                             HeadGradient h;
                             h.loss = std::nan("");
                             h.dz.assign(o.z.size(), Eigen::VectorXd::Zero(o.z[0].size()));
                             h.dscore.assign(o.z.size(), 0.0);
                             return h;
                           }),
                  Error);
}

TEST_CASE("embedding cache re-encodes on descriptor change") {
  const auto params = TaskFunctionParams::random(Hyperparams{}, 2);
  EmbeddingCache cache(params);
  auto inst = random_instance(ConstraintType::kPointToPoint, 5);
  const Embedding z = cache.lookup(inst).z;
  CHECK(z == encode(params, inst));
  inst.bindings[0].descriptor *= 2.0;
  CHECK(cache.lookup(inst).z == encode(params, inst));
  CHECK(cache.lookup(inst).z != z);
}

}  // TEST_SUITE
