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

#include "covgs/geometry.hpp"

#include <cmath>

#include "covgs/errors.hpp"

namespace covgs {

HomogeneousLine HomogeneousLine::from_coefficients(double a, double b, double c) {
  const double n = std::hypot(a, b);
  if (!(n > 0.0) || !std::isfinite(n)) {
    throw Error(ErrorKind::kDegenerateLine, "line normal (a, b) vanishes");
  }
  a /= n;
  b /= n;
  c /= n;
  const bool flip = (a != 0.0) ? (a < 0.0) : (b < 0.0);
  if (flip) {
    a = -a;
    b = -b;
    c = -c;
  }
  // Avoid negative zeros so equal lines compare equal bitwise.
  return HomogeneousLine(a + 0.0, b + 0.0, c + 0.0);
}

std::string_view short_name(ConstraintType t) {
  switch (t) {
    case ConstraintType::kPointToPoint:
      return "PP";
    case ConstraintType::kLineToLine:
      return "LL";
    case ConstraintType::kPointToLine:
      return "PL";
  }
  return "??";
}

ConstraintType parse_constraint_type(std::string_view s) {
  if (s == "PP") return ConstraintType::kPointToPoint;
  if (s == "LL") return ConstraintType::kLineToLine;
  if (s == "PL") return ConstraintType::kPointToLine;
  throw Error(ErrorKind::kConfig, "unknown constraint type '" + std::string(s) + "'");
}

int error_dimension(ConstraintType t) { return t == ConstraintType::kPointToPoint ? 2 : 1; }

HomogeneousLine line_from_points(const PixelPoint& p, const PixelPoint& q) {
  if (std::hypot(q.u - p.u, q.v - p.v) <= kDegenerateDistance) {
    throw Error(ErrorKind::kDegenerateLine, "line through coincident points");
  }
  // (p.u, p.v, 1) x (q.u, q.v, 1)
  return HomogeneousLine::from_coefficients(p.v - q.v, q.u - p.u, p.u * q.v - q.u * p.v);
}

ErrorVector pp_error(const PixelPoint& p, const PixelPoint& q) {
  ErrorVector e(2);
  e << q.u - p.u, q.v - p.v;
  return e;
}

ErrorVector ll_error(const HomogeneousLine& l1, const HomogeneousLine& l2) {
  ErrorVector e(1);
  e << l1.a() * l2.b() - l1.b() * l2.a();
  return e;
}

ErrorVector pl_error(const PixelPoint& p, const HomogeneousLine& l) {
  ErrorVector e(1);
  e << l.signed_distance(p);
  return e;
}

}  // namespace covgs
