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

// Homogeneous image-plane primitives and the per-constraint error functions.

#pragma once

#include <Eigen/Core>
#include <array>
#include <string>
#include <string_view>

namespace covgs {

struct PixelPoint {
  double u = 0.0;
  double v = 0.0;
};

/// Image line a*u + b*v + c = 0, kept with a^2 + b^2 = 1 and the first
/// nonzero of (a, b) positive.
class HomogeneousLine {
 public:
  /// Canonicalizes an arbitrary homogeneous triple. Throws DegenerateLine
  /// when (a, b) vanishes.
  static HomogeneousLine from_coefficients(double a, double b, double c);

  double a() const { return a_; }
  double b() const { return b_; }
  double c() const { return c_; }

  /// Signed distance in pixels.
  double signed_distance(const PixelPoint& p) const { return a_ * p.u + b_ * p.v + c_; }

 private:
  HomogeneousLine(double a, double b, double c) : a_(a), b_(b), c_(c) {}
  double a_;
  double b_;
  double c_;
};

enum class ConstraintType { kPointToPoint, kLineToLine, kPointToLine };

inline constexpr std::array<ConstraintType, 3> kAllConstraintTypes = {
    ConstraintType::kPointToPoint, ConstraintType::kLineToLine, ConstraintType::kPointToLine};

/// "PP", "LL" or "PL".
std::string_view short_name(ConstraintType t);
ConstraintType parse_constraint_type(std::string_view s);

/// Number of error components produced for one instance of `t`.
int error_dimension(ConstraintType t);

using ErrorVector = Eigen::VectorXd;

inline constexpr double kDegenerateDistance = 1e-9;

HomogeneousLine line_from_points(const PixelPoint& p, const PixelPoint& q);

ErrorVector pp_error(const PixelPoint& p, const PixelPoint& q);

/// Third component of l1 x l2; |value| is |sin| of the angle between the lines.
ErrorVector ll_error(const HomogeneousLine& l1, const HomogeneousLine& l2);

ErrorVector pl_error(const PixelPoint& p, const HomogeneousLine& l);

}  // namespace covgs
