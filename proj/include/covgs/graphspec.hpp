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

// Constraint graph topologies, candidate enumeration and automorphism
// canonicalization.
//
// Node-role convention (0-based):
//   PP: 0, 1 are the two points.
//   LL: 0-1 span the first line, 2-3 the second.
//   PL: 0 is the point, 1-2 span the line.

#pragma once

#include <Eigen/Core>
#include <array>
#include <compare>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "covgs/geometry.hpp"

namespace covgs {

struct FeaturePoint {
  int id = 0;
  Eigen::VectorXd descriptor;
  PixelPoint coords;
  // Optional object-segment tag; negative means untagged.
  int segment = -1;
};

struct Frame {
  int index = 0;
  std::vector<FeaturePoint> features;
};

using NodePermutation = std::array<int, 4>;

struct ConstraintGraphSpec {
  ConstraintType ctype;
  int node_count;
  std::vector<std::pair<int, int>> inner_edges;
  std::vector<std::pair<int, int>> outer_edges;
  // Each entry maps position i of the permuted instance to node perm[i] of
  // the original; entries past node_count are unused.
  std::vector<NodePermutation> automorphisms;
};

const ConstraintGraphSpec& spec_for(ConstraintType ctype);

/// Feature ids of an instance, minimized over the automorphism group.
struct CanonicalKey {
  std::array<int, 4> ids{-1, -1, -1, -1};
  auto operator<=>(const CanonicalKey&) const = default;
};

struct CanonicalKeyHash {
  std::size_t operator()(const CanonicalKey& k) const noexcept;
};

struct GraphInstance {
  ConstraintType ctype = ConstraintType::kPointToPoint;
  std::vector<FeaturePoint> bindings;
  CanonicalKey canonical_key;
};

CanonicalKey canonical_key(ConstraintType ctype, std::span<const int> ids);
CanonicalKey canonical_key(const GraphInstance& instance);

/// Builds an instance with the bindings kept in the given order.
GraphInstance make_instance(ConstraintType ctype, std::vector<FeaturePoint> bindings);

/// Reorders bindings so that their ids read exactly as the canonical key.
GraphInstance canonicalized(GraphInstance instance);

/// pi . I: binding i of the result is binding perm[i] of `instance`.
GraphInstance permuted(const GraphInstance& instance, const NodePermutation& perm);

struct EnumerationLimits {
  std::size_t max_instances = 20000;
  std::uint64_t seed = 0;
  // Keep only instances whose outer edges join features of different segments.
  bool cross_segment_only = false;
};

/// Compact instance: indices into a frame's feature list, canonical order.
struct InstanceRef {
  std::array<std::uint16_t, 4> nodes{};
  CanonicalKey key;
};

std::vector<InstanceRef> enumerate_refs(std::span<const FeaturePoint> features,
                                        ConstraintType ctype,
                                        const EnumerationLimits& limits = {});

std::vector<GraphInstance> enumerate_instances(std::span<const FeaturePoint> features,
                                               ConstraintType ctype,
                                               const EnumerationLimits& limits = {});

GraphInstance materialize(std::span<const FeaturePoint> features, ConstraintType ctype,
                          const InstanceRef& ref);

/// The error function psi: dispatches on the constraint type using the
/// node-role convention above. Throws DegenerateLine.
ErrorVector error_vector(const GraphInstance& instance);
ErrorVector error_vector(ConstraintType ctype, std::span<const PixelPoint> coords);
ErrorVector error_vector(std::span<const FeaturePoint> features, ConstraintType ctype,
                         const InstanceRef& ref);

}  // namespace covgs
