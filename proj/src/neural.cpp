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

#include "covgs/neural.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "covgs/errors.hpp"
#include "covgs/kernels.hpp"
#include "covgs/rng.hpp"

namespace covgs {
namespace {

using Eigen::ArrayXXd;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using G = ParamGroup;

struct Adjacency {
  MatrixXd inner;
  MatrixXd outer;
  VectorXd deg_inner;
  VectorXd deg_outer;
};

Adjacency build_adjacency(ConstraintType ctype) {
  const auto& spec = spec_for(ctype);
  const int n = spec.node_count;
  Adjacency a{MatrixXd::Zero(n, n), MatrixXd::Zero(n, n), VectorXd(), VectorXd()};
  for (auto [x, y] : spec.inner_edges) a.inner(x, y) = a.inner(y, x) = 1.0;
  for (auto [x, y] : spec.outer_edges) a.outer(x, y) = a.outer(y, x) = 1.0;
  a.deg_inner = a.inner.colwise().sum().transpose();
  a.deg_outer = a.outer.colwise().sum().transpose();
  return a;
}

const Adjacency& adjacency(ConstraintType ctype) {
  static const Adjacency pp = build_adjacency(ConstraintType::kPointToPoint);
  static const Adjacency ll = build_adjacency(ConstraintType::kLineToLine);
  static const Adjacency pl = build_adjacency(ConstraintType::kPointToLine);
  switch (ctype) {
    case ConstraintType::kPointToPoint:
      return pp;
    case ConstraintType::kLineToLine:
      return ll;
    case ConstraintType::kPointToLine:
      return pl;
  }
  return pp;
}

MatrixXd sigmoid(const MatrixXd& x) { return (1.0 / (1.0 + (-x.array()).exp())).matrix(); }

}  // namespace

TaskFunctionParams::TaskFunctionParams(const Hyperparams& hyper) : hyper_(hyper) {
  if (hyper.descriptor_dim <= 0 || hyper.hidden <= 0 || hyper.embedding <= 0 || hyper.rounds < 0) {
    throw Error(ErrorKind::kConfig, "hyperparameters must be positive");
  }
  const int D = hyper.descriptor_dim, H = hyper.hidden, d = hyper.embedding;
  struct Def {
    std::string_view name;
    int rows, cols;
    bool bias;
  };
  const Def defs[] = {
      {"input.W", H, D, false},     {"input.b", H, 1, true},       {"msg_inner.W", H, H, false},
      {"msg_inner.b", H, 1, true},  {"msg_outer.W", H, H, false},  {"msg_outer.b", H, 1, true},
      {"gru.W_r", H, H, false},     {"gru.U_r", H, H, false},      {"gru.b_r", H, 1, true},
      {"gru.W_u", H, H, false},     {"gru.U_u", H, H, false},      {"gru.b_u", H, 1, true},
      {"gru.W_n", H, H, false},     {"gru.U_n", H, H, false},      {"gru.b_n", H, 1, true},
      {"gru.b_hn", H, 1, true},     {"readout.W1", H, H, false},   {"readout.b1", H, 1, true},
      {"readout.W2", d, H, false},  {"readout.b2", d, 1, true},    {"scorer.W1", d, d, false},
      {"scorer.b1", d, 1, true},    {"scorer.W2", 1, d, false},    {"scorer.b2", 1, 1, true},
  };
  static_assert(std::size(defs) == static_cast<std::size_t>(ParamGroup::kCount));
  std::size_t offset = 0;
  for (const auto& def : defs) {
    groups_.push_back({def.name, def.rows, def.cols, offset, def.bias});
    offset += static_cast<std::size_t>(def.rows) * def.cols;
  }
  values_ = VectorXd::Zero(static_cast<Eigen::Index>(offset));
}

TaskFunctionParams TaskFunctionParams::random(const Hyperparams& hyper, std::uint64_t seed) {
  TaskFunctionParams p(hyper);
  Rng rng(seed);
  for (const auto& g : p.groups_) {
    if (g.is_bias) continue;
    const double bound = 1.0 / std::sqrt(static_cast<double>(g.cols));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (std::size_t i = 0; i < static_cast<std::size_t>(g.rows) * g.cols; ++i) {
      p.values_[static_cast<Eigen::Index>(g.offset + i)] = dist(rng);
    }
  }
  return p;
}

Eigen::Map<MatrixXd> TaskFunctionParams::mat(ParamGroup g) {
  const auto& s = group(g);
  return {values_.data() + s.offset, s.rows, s.cols};
}

Eigen::Map<const MatrixXd> TaskFunctionParams::mat(ParamGroup g) const {
  const auto& s = group(g);
  return {values_.data() + s.offset, s.rows, s.cols};
}

EncoderInput encoder_input(const GraphInstance& instance) {
  EncoderInput in{instance.ctype, {}};
  if (instance.bindings.empty()) return in;
  const auto D = instance.bindings.front().descriptor.size();
  in.descriptors.resize(D, static_cast<Eigen::Index>(instance.bindings.size()));
  for (std::size_t i = 0; i < instance.bindings.size(); ++i) {
    if (instance.bindings[i].descriptor.size() != D) {
      throw Error(ErrorKind::kDimensionMismatch, "non-uniform descriptor dimension");
    }
    in.descriptors.col(static_cast<Eigen::Index>(i)) = instance.bindings[i].descriptor;
  }
  return in;
}

void forward(const TaskFunctionParams& params, const EncoderInput& input, ForwardTape& tape) {
  const auto& hp = params.hyper();
  const int n = spec_for(input.ctype).node_count;
  if (input.descriptors.rows() != hp.descriptor_dim || input.descriptors.cols() != n) {
    throw Error(ErrorKind::kDimensionMismatch,
                "expected " + std::to_string(hp.descriptor_dim) + "x" + std::to_string(n) +
                    " descriptors, got " + std::to_string(input.descriptors.rows()) + "x" +
                    std::to_string(input.descriptors.cols()));
  }
  const auto& adj = adjacency(input.ctype);
  tape.ctype = input.ctype;
  tape.x = input.descriptors;
  tape.h0 = ((params.mat(G::kInputW) * tape.x).colwise() + params.mat(G::kInputB).col(0))
                .array()
                .tanh()
                .matrix();

  const auto W_mi = params.mat(G::kInnerW);
  const auto W_mo = params.mat(G::kOuterW);
  const VectorXd b_mi = params.mat(G::kInnerB).col(0);
  const VectorXd b_mo = params.mat(G::kOuterB).col(0);

  MatrixXd h = tape.h0;
  tape.rounds.resize(static_cast<std::size_t>(hp.rounds));
  for (auto& rd : tape.rounds) {
    rd.h_prev = h;
    rd.c_inner = h * adj.inner;
    rd.c_outer = h * adj.outer;
    rd.m = W_mi * rd.c_inner + b_mi * adj.deg_inner.transpose() + W_mo * rd.c_outer +
           b_mo * adj.deg_outer.transpose();
    rd.r = sigmoid((params.mat(G::kGruWr) * rd.m + params.mat(G::kGruUr) * h).colwise() +
                   params.mat(G::kGruBr).col(0));
    rd.u = sigmoid((params.mat(G::kGruWu) * rd.m + params.mat(G::kGruUu) * h).colwise() +
                   params.mat(G::kGruBu).col(0));
    rd.gh = (params.mat(G::kGruUn) * h).colwise() + params.mat(G::kGruBhn).col(0);
    rd.n = (((params.mat(G::kGruWn) * rd.m).colwise() + params.mat(G::kGruBn).col(0)).array() +
            rd.r.array() * rd.gh.array())
               .tanh()
               .matrix();
    h = ((1.0 - rd.u.array()) * rd.n.array() + rd.u.array() * h.array()).matrix();
  }

  tape.hbar = h.rowwise().mean();
  tape.a = (params.mat(G::kReadoutW1) * tape.hbar + params.mat(G::kReadoutB1).col(0)).array().tanh().matrix();
  tape.z = params.mat(G::kReadoutW2) * tape.a + params.mat(G::kReadoutB2).col(0);
  tape.s1 = (params.mat(G::kScorerW1) * tape.z + params.mat(G::kScorerB1).col(0)).array().tanh().matrix();
  tape.score = (params.mat(G::kScorerW2) * tape.s1)(0, 0) + params.mat(G::kScorerB2)(0, 0);
}

void backward(const TaskFunctionParams& params, const ForwardTape& tape, const VectorXd& dz_in,
              double dscore, TaskFunctionParams& grad) {
  const auto& adj = adjacency(tape.ctype);
  const int n = static_cast<int>(tape.x.cols());

  // Scorer.
  VectorXd dz = dz_in;
  if (dscore != 0.0) {
    grad.mat(G::kScorerW2).row(0) += dscore * tape.s1.transpose();
    grad.mat(G::kScorerB2)(0, 0) += dscore;
    const VectorXd ds1 = dscore * params.mat(G::kScorerW2).row(0).transpose();
    const VectorXd dpre = ds1.array() * (1.0 - tape.s1.array().square());
    grad.mat(G::kScorerW1) += dpre * tape.z.transpose();
    grad.mat(G::kScorerB1).col(0) += dpre;
    dz += params.mat(G::kScorerW1).transpose() * dpre;
  }

  // Readout.
  grad.mat(G::kReadoutW2) += dz * tape.a.transpose();
  grad.mat(G::kReadoutB2).col(0) += dz;
  const VectorXd da = params.mat(G::kReadoutW2).transpose() * dz;
  const VectorXd dpa = da.array() * (1.0 - tape.a.array().square());
  grad.mat(G::kReadoutW1) += dpa * tape.hbar.transpose();
  grad.mat(G::kReadoutB1).col(0) += dpa;
  const VectorXd dhbar = params.mat(G::kReadoutW1).transpose() * dpa;
  MatrixXd dh = (dhbar / static_cast<double>(n)).replicate(1, n);

  // Message-passing rounds in reverse.
  for (auto it = tape.rounds.rbegin(); it != tape.rounds.rend(); ++it) {
    const auto& rd = *it;
    const ArrayXXd u = rd.u.array();
    const ArrayXXd nn = rd.n.array();
    const ArrayXXd r = rd.r.array();
    const MatrixXd dn = (dh.array() * (1.0 - u)).matrix();
    const MatrixXd du = (dh.array() * (rd.h_prev.array() - nn)).matrix();
    MatrixXd dhp = (dh.array() * u).matrix();

    const MatrixXd dn_pre = (dn.array() * (1.0 - nn.square())).matrix();
    grad.mat(G::kGruWn) += dn_pre * rd.m.transpose();
    grad.mat(G::kGruBn).col(0) += dn_pre.rowwise().sum();
    MatrixXd dm = params.mat(G::kGruWn).transpose() * dn_pre;

    const MatrixXd dr = (dn_pre.array() * rd.gh.array()).matrix();
    const MatrixXd dgh = (dn_pre.array() * r).matrix();
    grad.mat(G::kGruUn) += dgh * rd.h_prev.transpose();
    grad.mat(G::kGruBhn).col(0) += dgh.rowwise().sum();
    dhp += params.mat(G::kGruUn).transpose() * dgh;

    const MatrixXd du_pre = (du.array() * u * (1.0 - u)).matrix();
    grad.mat(G::kGruWu) += du_pre * rd.m.transpose();
    grad.mat(G::kGruUu) += du_pre * rd.h_prev.transpose();
    grad.mat(G::kGruBu).col(0) += du_pre.rowwise().sum();
    dm += params.mat(G::kGruWu).transpose() * du_pre;
    dhp += params.mat(G::kGruUu).transpose() * du_pre;

    const MatrixXd dr_pre = (dr.array() * r * (1.0 - r)).matrix();
    grad.mat(G::kGruWr) += dr_pre * rd.m.transpose();
    grad.mat(G::kGruUr) += dr_pre * rd.h_prev.transpose();
    grad.mat(G::kGruBr).col(0) += dr_pre.rowwise().sum();
    dm += params.mat(G::kGruWr).transpose() * dr_pre;
    dhp += params.mat(G::kGruUr).transpose() * dr_pre;

    grad.mat(G::kInnerW) += dm * rd.c_inner.transpose();
    grad.mat(G::kInnerB).col(0) += dm * adj.deg_inner;
    grad.mat(G::kOuterW) += dm * rd.c_outer.transpose();
    grad.mat(G::kOuterB).col(0) += dm * adj.deg_outer;
    // Adjacency matrices are symmetric.
    dhp += (params.mat(G::kInnerW).transpose() * dm) * adj.inner;
    dhp += (params.mat(G::kOuterW).transpose() * dm) * adj.outer;

    dh = std::move(dhp);
  }

  const MatrixXd dpre0 = (dh.array() * (1.0 - tape.h0.array().square())).matrix();
  grad.mat(G::kInputW) += dpre0 * tape.x.transpose();
  grad.mat(G::kInputB).col(0) += dpre0.rowwise().sum();
}

Embedding encode(const TaskFunctionParams& params, const EncoderInput& input) {
  ForwardTape tape;
  forward(params, input, tape);
  return tape.z;
}

Embedding encode(const TaskFunctionParams& params, const GraphInstance& instance) {
  return encode(params, encoder_input(instance));
}

double score(const TaskFunctionParams& params, const Embedding& z) {
  if (z.size() != params.hyper().embedding) {
    throw Error(ErrorKind::kDimensionMismatch, "embedding dimension mismatch");
  }
  const VectorXd s1 = (params.mat(G::kScorerW1) * z + params.mat(G::kScorerB1).col(0)).array().tanh().matrix();
  return (params.mat(G::kScorerW2) * s1)(0, 0) + params.mat(G::kScorerB2)(0, 0);
}

std::vector<double> softmax(std::span<const double> scores, std::span<const char> valid, double tau) {
  if (!(tau > 0.0)) throw Error(ErrorKind::kConfig, "softmax temperature must be positive");
  std::vector<double> p(scores.size(), 0.0);
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < scores.size(); ++i)
    if (valid[i]) mx = std::max(mx, scores[i]);
  if (!std::isfinite(mx)) return p;
  double sum = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!valid[i]) continue;
    p[i] = std::exp((scores[i] - mx) / tau);
    sum += p[i];
  }
  for (auto& v : p) v /= sum;
  return p;
}

SelectionResult select_from_scores(std::vector<double> scores, std::span<const char> valid,
                                   std::span<const CanonicalKey> keys, int p, double tau) {
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (valid[i]) {
      order.push_back(i);
    } else {
      scores[i] = -std::numeric_limits<double>::infinity();
    }
  }
  if (order.empty()) throw Error(ErrorKind::kNoValidCandidates, "no valid candidate instances");
  SelectionResult res;
  res.probabilities = softmax(scores, valid, tau);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return keys[a] < keys[b];
  });
  order.resize(std::min<std::size_t>(order.size(), static_cast<std::size_t>(std::max(p, 0))));
  res.top = std::move(order);
  res.scores = std::move(scores);
  return res;
}

SelectionResult select(const TaskFunctionParams& params, std::span<const GraphInstance> candidates,
                       int p, double tau) {
  std::vector<double> scores(candidates.size(), 0.0);
  std::vector<char> valid(candidates.size(), 0);
  std::vector<CanonicalKey> keys(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    keys[i] = candidates[i].canonical_key;
    try {
      (void)error_vector(candidates[i]);
      valid[i] = 1;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kDegenerateLine) throw;
      continue;
    }
    scores[i] = score(params, encode(params, candidates[i]));
  }
  return select_from_scores(std::move(scores), valid, keys, p, tau);
}

GradientResult gradient(const TaskFunctionParams& params, std::span<const EncoderInput> batch,
                        const LossHead& head) {
  std::vector<ForwardTape> tapes(batch.size());
  CandidateOutputs out;
  kernels::forward_batch(params, batch, tapes, out);
  HeadGradient hg = head(out);
  if (!std::isfinite(hg.loss)) throw Error(ErrorKind::kNonFiniteLoss, "loss is not finite");
  GradientResult res{hg.loss, TaskFunctionParams(params.hyper())};
  kernels::backward_batch(params, tapes, hg.dz, hg.dscore, res.grad);
  if (!res.grad.values().allFinite()) throw Error(ErrorKind::kNonFiniteLoss, "gradient is not finite");
  return res;
}

const EmbeddingCache::Entry& EmbeddingCache::lookup(const GraphInstance& instance) {
  EncoderInput in = encoder_input(instance);
  auto& bucket = entries_[instance.canonical_key];
  for (const auto& e : bucket) {
    if (e.descriptors.rows() == in.descriptors.rows() && e.descriptors == in.descriptors) return e;
  }
  ForwardTape tape;
  forward(*params_, in, tape);
  bucket.push_back({std::move(in.descriptors), tape.z, tape.score});
  return bucket.back();
}

const EmbeddingCache::Entry& EmbeddingCache::lookup(std::span<const FeaturePoint> features,
                                                    ConstraintType ctype, const InstanceRef& ref) {
  return lookup(materialize(features, ctype, ref));
}

}  // namespace covgs
