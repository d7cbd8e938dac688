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

#include "covgs/selector.hpp"

#include <algorithm>
#include <limits>
#include <string>

#include "covgs/errors.hpp"
#include "covgs/rng.hpp"

namespace covgs {
namespace {

std::uint64_t key_hash(const CanonicalKey& k) {
  std::uint64_t h = 0;
  for (int id : k.ids) h = mix_seed(h, static_cast<std::uint64_t>(static_cast<std::int64_t>(id)));
  return h;
}

}  // namespace

ValidCandidates valid_candidates(const Frame& frame, ConstraintType ctype, const EnumerationLimits& limits) {
  ValidCandidates out;
  EnumerationLimits lim = limits;
  lim.seed = mix_seed(limits.seed, static_cast<std::uint64_t>(frame.index));
  try {
    out.refs = enumerate_refs(frame.features, ctype, lim);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::kTooFewFeatures) throw;
  }
  out.valid.assign(out.refs.size(), 0);
  for (std::size_t i = 0; i < out.refs.size(); ++i) {
    try {
      error_vector(frame.features, ctype, out.refs[i]);
      out.valid[i] = 1;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kDegenerateLine) throw;
    }
  }
  return out;
}

TaskFunctionSelector::TaskFunctionSelector(std::map<ConstraintType, TaskFunctionParams> params,
                                           EnumerationLimits limits, double tau)
    : params_(std::move(params)), limits_(limits), tau_(tau) {
  for (const auto& [ctype, p] : params_) caches_[ctype] = std::make_unique<EmbeddingCache>(p);
}

const TaskFunctionParams& TaskFunctionSelector::params(ConstraintType ctype) const {
  auto it = params_.find(ctype);
  if (it == params_.end()) {
    throw Error(ErrorKind::kConfig, "no task function for constraint type " + std::string(short_name(ctype)));
  }
  return it->second;
}

SelectionResult TaskFunctionSelector::rank(const Frame& frame, ConstraintType ctype, int p, ValidCandidates* out) {
  const auto& prm = params(ctype);
  auto& cache = *caches_.at(ctype);
  ValidCandidates vc = valid_candidates(frame, ctype, limits_);
  std::vector<double> scores(vc.refs.size(), -std::numeric_limits<double>::infinity());
  std::vector<CanonicalKey> keys(vc.refs.size());
  for (std::size_t i = 0; i < vc.refs.size(); ++i) {
    keys[i] = vc.refs[i].key;
    if (!vc.valid[i]) continue;
    const auto& feat = frame.features[vc.refs[i].nodes[0]];
    if (feat.descriptor.size() != prm.hyper().descriptor_dim) {
      throw Error(ErrorKind::kDimensionMismatch, "descriptor dimension " + std::to_string(feat.descriptor.size()) +
                                                     " differs from the model's " +
                                                     std::to_string(prm.hyper().descriptor_dim));
    }
    scores[i] = cache.lookup(frame.features, ctype, vc.refs[i]).score;
  }
  SelectionResult r = select_from_scores(std::move(scores), vc.valid, keys, p, tau_);
  if (out) *out = std::move(vc);
  return r;
}

namespace {

// Bindings in canonical-key order keep error signs stable across frames and
// selectors.
Selected canonical_selection(GraphInstance instance) {
  GraphInstance c = canonicalized(std::move(instance));
  ErrorVector e = error_vector(c);
  return {std::move(c), std::move(e)};
}

}  // namespace

Selected TaskFunctionSelector::select(const Frame& frame, ConstraintType ctype) {
  ValidCandidates vc;
  const SelectionResult r = rank(frame, ctype, 1, &vc);
  const auto& ref = vc.refs[r.top.front()];
  return canonical_selection(materialize(frame.features, ctype, ref));
}

RandomSelector::RandomSelector(std::uint64_t seed, EnumerationLimits limits, bool per_frame)
    : seed_(seed), limits_(limits), per_frame_(per_frame) {}

Selected RandomSelector::select(const Frame& frame, ConstraintType ctype) {
  const ValidCandidates vc = valid_candidates(frame, ctype, limits_);
  const std::uint64_t salt =
      per_frame_ ? mix_seed(seed_, static_cast<std::uint64_t>(frame.index)) : seed_;
  std::size_t best = vc.refs.size();
  std::uint64_t best_h = 0;
  for (std::size_t i = 0; i < vc.refs.size(); ++i) {
    if (!vc.valid[i]) continue;
    const std::uint64_t h = mix_seed(salt, key_hash(vc.refs[i].key));
    if (best == vc.refs.size() || h < best_h) {
      best = i;
      best_h = h;
    }
  }
  if (best == vc.refs.size()) throw Error(ErrorKind::kNoValidCandidates, "no valid candidate in frame");
  return canonical_selection(materialize(frame.features, ctype, vc.refs[best]));
}

bool key_visible(const Frame& frame, const CanonicalKey& key, ConstraintType ctype) {
  for (int i = 0; i < spec_for(ctype).node_count; ++i) {
    const int id = key.ids[i];
    if (std::none_of(frame.features.begin(), frame.features.end(),
                     [id](const FeaturePoint& f) { return f.id == id; })) {
      return false;
    }
  }
  return true;
}

std::optional<Selected> SelectionStream::next(const Frame& frame, ConstraintType ctype) {
  State& st = state_[ctype];
  if (st.last && st.abstained < bridge_ && !key_visible(frame, *st.last, ctype)) {
    ++st.abstained;
    return std::nullopt;
  }
  st.abstained = 0;
  try {
    Selected s = selector_.select(frame, ctype);
    st.last = s.instance.canonical_key;
    return s;
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::kNoValidCandidates) throw;
    return std::nullopt;
  }
}

std::optional<GraphInstance> ground_truth_instance(const Frame& frame, const GroundTruth& truth,
                                                   ConstraintType ctype) {
  auto it = truth.bindings.find(ctype);
  if (it == truth.bindings.end()) return std::nullopt;
  std::vector<FeaturePoint> bound;
  for (int id : it->second) {
    auto f = std::find_if(frame.features.begin(), frame.features.end(),
                          [id](const FeaturePoint& fp) { return fp.id == id; });
    if (f == frame.features.end()) return std::nullopt;
    bound.push_back(*f);
  }
  return make_instance(ctype, std::move(bound));
}

Selected OracleSelector::select(const Frame& frame, ConstraintType ctype) {
  auto inst = ground_truth_instance(frame, truth_, ctype);
  if (!inst) throw Error(ErrorKind::kNoValidCandidates, "ground-truth features missing from frame");
  return canonical_selection(std::move(*inst));
}

}  // namespace covgs
