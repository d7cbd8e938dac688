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

#include "covgs/graphspec.hpp"

#include <algorithm>
#include <numeric>
#include <string>
#include <unordered_set>

#include "covgs/errors.hpp"
#include "covgs/rng.hpp"

namespace covgs {
namespace {

ConstraintGraphSpec make_pp() {
  return {ConstraintType::kPointToPoint, 2, {}, {{0, 1}}, {{0, 1, 2, 3}, {1, 0, 2, 3}}};
}

ConstraintGraphSpec make_ll() {
  ConstraintGraphSpec s{ConstraintType::kLineToLine, 4, {{0, 1}, {2, 3}},
                        {{0, 2}, {0, 3}, {1, 2}, {1, 3}}, {}};
  // Generated by swap-within-line-1, swap-within-line-2 and swap-lines.
  for (int lines = 0; lines < 2; ++lines) {
    for (int s1 = 0; s1 < 2; ++s1) {
      for (int s2 = 0; s2 < 2; ++s2) {
        NodePermutation first = {s1, 1 - s1, 2 + s2, 3 - s2};
        NodePermutation p = first;
        if (lines) p = {first[2], first[3], first[0], first[1]};
        s.automorphisms.push_back(p);
      }
    }
  }
  return s;
}

ConstraintGraphSpec make_pl() {
  return {ConstraintType::kPointToLine, 3, {{1, 2}}, {{0, 1}, {0, 2}}, {{0, 1, 2, 3}, {0, 2, 1, 3}}};
}

// Index of the automorphism that minimizes the permuted id tuple.
std::size_t argmin_automorphism(const ConstraintGraphSpec& spec, std::span<const int> ids) {
  std::size_t best = 0;
  std::array<int, 4> best_ids{-1, -1, -1, -1};
  for (std::size_t a = 0; a < spec.automorphisms.size(); ++a) {
    std::array<int, 4> cur{-1, -1, -1, -1};
    for (int i = 0; i < spec.node_count; ++i) cur[i] = ids[spec.automorphisms[a][i]];
    if (a == 0 || cur < best_ids) {
      best = a;
      best_ids = cur;
    }
  }
  return best;
}

bool passes_segment_filter(const ConstraintGraphSpec& spec, std::span<const FeaturePoint> f,
                           const std::array<std::uint16_t, 4>& nodes) {
  for (auto [x, y] : spec.outer_edges) {
    const int sx = f[nodes[x]].segment;
    const int sy = f[nodes[y]].segment;
    if (sx >= 0 && sy >= 0 && sx == sy) return false;
  }
  return true;
}

}  // namespace

const ConstraintGraphSpec& spec_for(ConstraintType ctype) {
  static const ConstraintGraphSpec pp = make_pp();
  static const ConstraintGraphSpec ll = make_ll();
  static const ConstraintGraphSpec pl = make_pl();
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

std::size_t CanonicalKeyHash::operator()(const CanonicalKey& k) const noexcept {
  std::uint64_t h = 0;
  for (int id : k.ids) h = mix_seed(h, static_cast<std::uint64_t>(static_cast<std::int64_t>(id)));
  return static_cast<std::size_t>(h);
}

CanonicalKey canonical_key(ConstraintType ctype, std::span<const int> ids) {
  const auto& spec = spec_for(ctype);
  if (static_cast<int>(ids.size()) != spec.node_count) {
    throw Error(ErrorKind::kShapeMismatch, "binding count does not match node count");
  }
  const auto& perm = spec.automorphisms[argmin_automorphism(spec, ids)];
  CanonicalKey key;
  for (int i = 0; i < spec.node_count; ++i) key.ids[i] = ids[perm[i]];
  return key;
}

CanonicalKey canonical_key(const GraphInstance& instance) {
  std::array<int, 4> ids{};
  for (std::size_t i = 0; i < instance.bindings.size() && i < 4; ++i) ids[i] = instance.bindings[i].id;
  return canonical_key(instance.ctype, std::span<const int>(ids.data(), instance.bindings.size()));
}

GraphInstance make_instance(ConstraintType ctype, std::vector<FeaturePoint> bindings) {
  const auto& spec = spec_for(ctype);
  if (static_cast<int>(bindings.size()) != spec.node_count) {
    throw Error(ErrorKind::kShapeMismatch, "instance of " + std::string(short_name(ctype)) +
                                               " needs " + std::to_string(spec.node_count) +
                                               " bindings");
  }
  for (std::size_t i = 0; i < bindings.size(); ++i) {
    for (std::size_t j = i + 1; j < bindings.size(); ++j) {
      if (bindings[i].id == bindings[j].id) {
        throw Error(ErrorKind::kData, "feature id bound twice in one instance");
      }
    }
  }
  GraphInstance inst{ctype, std::move(bindings), {}};
  inst.canonical_key = canonical_key(inst);
  return inst;
}

GraphInstance canonicalized(GraphInstance instance) {
  const auto& spec = spec_for(instance.ctype);
  std::array<int, 4> ids{};
  for (int i = 0; i < spec.node_count; ++i) ids[i] = instance.bindings[i].id;
  const auto& perm =
      spec.automorphisms[argmin_automorphism(spec, std::span<const int>(ids.data(), spec.node_count))];
  return permuted(instance, perm);
}

GraphInstance permuted(const GraphInstance& instance, const NodePermutation& perm) {
  GraphInstance out{instance.ctype, {}, instance.canonical_key};
  out.bindings.reserve(instance.bindings.size());
  for (std::size_t i = 0; i < instance.bindings.size(); ++i) out.bindings.push_back(instance.bindings[perm[i]]);
  return out;
}

std::vector<InstanceRef> enumerate_refs(std::span<const FeaturePoint> features, ConstraintType ctype,
                                        const EnumerationLimits& limits) {
  const auto& spec = spec_for(ctype);
  const int m = static_cast<int>(features.size());
  if (m < spec.node_count) {
    throw Error(ErrorKind::kTooFewFeatures, std::to_string(m) + " features for a " +
                                                std::to_string(spec.node_count) + "-node constraint");
  }
  if (m > 65535) throw Error(ErrorKind::kData, "too many features in one frame");
  {
    std::unordered_set<int> seen;
    for (const auto& f : features) {
      if (!seen.insert(f.id).second) {
        throw Error(ErrorKind::kData, "duplicate feature id " + std::to_string(f.id) + " in frame");
      }
    }
  }

  std::vector<InstanceRef> out;
  auto emit = [&](std::array<std::uint16_t, 4> nodes) {
    if (limits.cross_segment_only && !passes_segment_filter(spec, features, nodes)) return;
    std::array<int, 4> ids{-1, -1, -1, -1};
    for (int i = 0; i < spec.node_count; ++i) ids[i] = features[nodes[i]].id;
    const auto& perm =
        spec.automorphisms[argmin_automorphism(spec, std::span<const int>(ids.data(), spec.node_count))];
    InstanceRef ref;
    for (int i = 0; i < spec.node_count; ++i) {
      ref.nodes[i] = nodes[perm[i]];
      ref.key.ids[i] = ids[perm[i]];
    }
    out.push_back(ref);
  };

  using u16 = std::uint16_t;
  switch (ctype) {
    case ConstraintType::kPointToPoint:
      for (int i = 0; i < m; ++i)
        for (int j = i + 1; j < m; ++j) emit({u16(i), u16(j), 0, 0});
      break;
    case ConstraintType::kLineToLine: {
      std::vector<std::pair<int, int>> pairs;
      for (int i = 0; i < m; ++i)
        for (int j = i + 1; j < m; ++j) pairs.emplace_back(i, j);
      for (std::size_t a = 0; a < pairs.size(); ++a) {
        for (std::size_t b = a + 1; b < pairs.size(); ++b) {
          auto [i, j] = pairs[a];
          auto [k, l] = pairs[b];
          if (i == k || i == l || j == k || j == l) continue;
          emit({u16(i), u16(j), u16(k), u16(l)});
        }
      }
      break;
    }
    case ConstraintType::kPointToLine:
      for (int p = 0; p < m; ++p)
        for (int j = 0; j < m; ++j)
          for (int k = j + 1; k < m; ++k)
            if (j != p && k != p) emit({u16(p), u16(j), u16(k), 0});
      break;
  }

  if (out.size() > limits.max_instances) {
    std::vector<std::size_t> idx(out.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    Rng rng(limits.seed);
    for (std::size_t i = 0; i < limits.max_instances; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
      std::swap(idx[i], idx[pick(rng)]);
    }
    idx.resize(limits.max_instances);
    std::sort(idx.begin(), idx.end());
    std::vector<InstanceRef> kept;
    kept.reserve(idx.size());
    for (auto i : idx) kept.push_back(out[i]);
    out = std::move(kept);
  }
  return out;
}

GraphInstance materialize(std::span<const FeaturePoint> features, ConstraintType ctype,
                          const InstanceRef& ref) {
  const auto& spec = spec_for(ctype);
  GraphInstance inst{ctype, {}, ref.key};
  inst.bindings.reserve(spec.node_count);
  for (int i = 0; i < spec.node_count; ++i) inst.bindings.push_back(features[ref.nodes[i]]);
  return inst;
}

std::vector<GraphInstance> enumerate_instances(std::span<const FeaturePoint> features,
                                               ConstraintType ctype, const EnumerationLimits& limits) {
  auto refs = enumerate_refs(features, ctype, limits);
  std::vector<GraphInstance> out;
  out.reserve(refs.size());
  for (const auto& r : refs) out.push_back(materialize(features, ctype, r));
  return out;
}

ErrorVector error_vector(ConstraintType ctype, std::span<const PixelPoint> y) {
  if (static_cast<int>(y.size()) != spec_for(ctype).node_count) {
    throw Error(ErrorKind::kShapeMismatch, "incomplete node bindings");
  }
  switch (ctype) {
    case ConstraintType::kPointToPoint:
      return pp_error(y[0], y[1]);
    case ConstraintType::kLineToLine:
      return ll_error(line_from_points(y[0], y[1]), line_from_points(y[2], y[3]));
    case ConstraintType::kPointToLine:
      return pl_error(y[0], line_from_points(y[1], y[2]));
  }
  return {};
}

ErrorVector error_vector(const GraphInstance& instance) {
  std::array<PixelPoint, 4> y{};
  const std::size_t n = instance.bindings.size();
  if (n > 4) throw Error(ErrorKind::kShapeMismatch, "too many bindings");
  for (std::size_t i = 0; i < n; ++i) y[i] = instance.bindings[i].coords;
  return error_vector(instance.ctype, std::span<const PixelPoint>(y.data(), n));
}

ErrorVector error_vector(std::span<const FeaturePoint> features, ConstraintType ctype,
                         const InstanceRef& ref) {
  const int n = spec_for(ctype).node_count;
  std::array<PixelPoint, 4> y{};
  for (int i = 0; i < n; ++i) y[i] = features[ref.nodes[i]].coords;
  return error_vector(ctype, std::span<const PixelPoint>(y.data(), n));
}

}  // namespace covgs
