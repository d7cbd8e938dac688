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

#include "covgs/errors.hpp"
#include "covgs/pipeline.hpp"
#include "covgs/selector.hpp"
#include "covgs/sim.hpp"

using namespace covgs;
using Eigen::Isometry3d;
using Eigen::Vector3d;

namespace {

BodyPoint body(int id, Vector3d pos) {
  BodyPoint b;
  b.id = id;
  b.position = pos;
  b.descriptor = Eigen::VectorXd::Ones(4);
  return b;
}

Scene axis_scene() {
  Scene s;
  s.noise = {0.0, 0.0};
  s.tool.points = {body(100, {0.01, -0.02, 0.0}), body(101, {0.0, 0.0, 0.1})};
  s.target.points = {body(0, {0.0, 0.0, 1.0}), body(1, {2.0, 0.0, 1.0})};
  return s;
}

const std::vector<CategoryScene>& scenes() {
  static const auto s = build_scenes(RunConfig{});
  return s;
}

double cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return a.dot(b) / (a.norm() * b.norm()); }

const BodyPoint& point(const RigidObjectModel& m, int id) {
  for (const auto& p : m.points) {
    if (p.id == id) return p;
  }
  throw std::runtime_error("missing point");
}

}  // namespace

TEST_SUITE("sim") {

TEST_CASE("noise-free axis-aligned projection") {
  const Scene s = axis_scene();
  Isometry3d pose = Isometry3d::Identity();
  pose.translation() = Vector3d(0, 0, 0.5);
  const Frame f = render_frame(s, pose, 1, 7);
  CHECK(f.index == 7);
  REQUIRE(f.features.size() == 3);  // target point 1 projects outside the image
  CHECK(f.features[0].id == 0);
  CHECK(f.features[0].coords.u == doctest::Approx(320.0));
  CHECK(f.features[0].coords.v == doctest::Approx(240.0));
  CHECK(f.features[0].segment == kTargetSegment);
  CHECK(f.features[1].id == 100);
  CHECK(f.features[1].coords.u == doctest::Approx(330.0).epsilon(1e-12));
  CHECK(f.features[1].coords.v == doctest::Approx(220.0).epsilon(1e-12));
  CHECK(f.features[1].segment == kToolSegment);
  CHECK(f.features[2].coords.u == doctest::Approx(320.0));

  Isometry3d behind = Isometry3d::Identity();
  behind.translation() = Vector3d(0, 0, -1.0);
  try {
    render_frame(s, behind, 1);
    FAIL("expected BehindCamera");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kBehindCamera);
  }
}

TEST_CASE("noise and dropout are seeded") {
  Scene s = axis_scene();
  s.noise = {0.5, 0.0};
  Isometry3d pose = Isometry3d::Identity();
  pose.translation() = Vector3d(0, 0, 0.5);
  const Frame a = render_frame(s, pose, 3), b = render_frame(s, pose, 3), c = render_frame(s, pose, 4);
  REQUIRE(a.features.size() == b.features.size());
  for (std::size_t i = 0; i < a.features.size(); ++i) {
    CHECK(a.features[i].coords.u == b.features[i].coords.u);
    CHECK(a.features[i].coords.v == b.features[i].coords.v);
  }
  CHECK(a.features[0].coords.u != c.features[0].coords.u);
  s.noise = {0.0, 1.0};
  CHECK(render_frame(s, pose, 3).features.empty());
}

TEST_CASE("categories") {
  const auto& sc = scenes();
  REQUIRE(sc.size() == 4);
  const HammerTemplate tmpl;
  for (const auto& cs : sc) {
    const auto& tool = cs.scene.tool;
    int functional = 0, distractors = 0;
    for (const auto& p : tool.points) {
      CHECK(p.id >= kToolIdBase);
      CHECK(p.descriptor.size() == tmpl.descriptor_dim);
      if (p.role == FeatureRole::kDistractor) ++distractors;
      else ++functional;
    }
    CHECK(functional >= 3);
    CHECK(distractors >= tmpl.min_distractors);
    CHECK(distractors <= tmpl.max_distractors);
  }
  for (std::size_t i = 0; i < sc.size(); ++i) {
    for (std::size_t j = i + 1; j < sc.size(); ++j) {
      const auto& a = sc[i].scene.tool;
      const auto& b = sc[j].scene.tool;
      CHECK(cosine(point(a, a.face_id).descriptor, point(b, b.face_id).descriptor) >= 0.8);
      CHECK(cosine(point(a, a.edge_a_id).descriptor, point(b, b.edge_a_id).descriptor) >= 0.8);
      CHECK(cosine(point(a, a.edge_b_id).descriptor, point(b, b.edge_b_id).descriptor) >= 0.8);
    }
  }
  const auto again = generate_category(99, 2, tmpl);
  const auto once = generate_category(99, 2, tmpl);
  REQUIRE(again.points.size() == once.points.size());
  for (std::size_t i = 0; i < once.points.size(); ++i) {
    CHECK(again.points[i].position == once.points[i].position);
    CHECK(again.points[i].descriptor == once.points[i].descriptor);
  }
}

TEST_CASE("goal pose satisfies the goal") {
  for (const auto& cs : scenes()) {
    for (double yaw : {-0.3, 0.0, 0.4}) {
      const Isometry3d g = solve_goal_pose(cs.scene, cs.goal, yaw);
      const auto e = goal_errors(cs.scene, cs.goal, g);
      CHECK(e.at(ConstraintType::kPointToPoint).norm() < 1e-6);
      CHECK(std::abs(e.at(ConstraintType::kLineToLine)[0]) < 1e-9);
    }
  }
  GoalSpec bad;
  CHECK_THROWS_AS(solve_goal_pose(scenes()[0].scene, bad, 0.0), Error);
}

TEST_CASE("demonstrations end at the goal") {
  const auto& cs = scenes()[1];
  const DemoVideo v = generate_demo(cs.scene, cs.goal, 80, 5);
  const DemoVideo w = generate_demo(cs.scene, cs.goal, 80, 5);
  REQUIRE(v.frames.size() == 80);
  REQUIRE(v.ground_truth.has_value());
  for (std::size_t t = 1; t < v.frames.size(); ++t) CHECK(v.frames[t].index > v.frames[t - 1].index);
  for (std::size_t t = 0; t < v.frames.size(); ++t) {
    REQUIRE(v.frames[t].features.size() == w.frames[t].features.size());
    for (std::size_t i = 0; i < v.frames[t].features.size(); ++i) {
      CHECK(v.frames[t].features[i].coords.u == w.frames[t].features[i].coords.u);
    }
  }
  // the last frames where the ground truth is visible are within tolerance
  int checked = 0;
  for (auto t = v.frames.size(); t-- > v.frames.size() - 5;) {
    const auto pp = ground_truth_instance(v.frames[t], *v.ground_truth, ConstraintType::kPointToPoint);
    const auto ll = ground_truth_instance(v.frames[t], *v.ground_truth, ConstraintType::kLineToLine);
    if (!pp || !ll) continue;
    CHECK(error_vector(*pp).cwiseAbs().maxCoeff() < 10.0);
    CHECK(std::abs(error_vector(*ll)[0]) < 0.1);
    ++checked;
  }
  CHECK(checked > 0);
}

TEST_CASE("twist plant") {
  const auto& cs = scenes()[0];
  const Isometry3d g = solve_goal_pose(cs.scene, cs.goal, 0.0);
  TwistPlant at_goal(cs.scene, cs.goal, g, 1);
  const auto oe = at_goal.oracle_errors();
  REQUIRE(oe.has_value());
  CHECK(oe->at(ConstraintType::kPointToPoint).norm() < 1e-6);
  CHECK(at_goal.dof() == 6);
  CHECK(at_goal.probe_deltas().size() == 6);

  const Isometry3d start = sample_start_pose(g, DemoOptions{}, 3);
  TwistPlant p(cs.scene, cs.goal, start, 1);
  const Frame a = p.observe();
  Eigen::VectorXd dq(6);
  dq << 0.01, -0.01, 0.005, 0.02, 0.0, -0.03;
  p.act(dq);
  CHECK((p.joints() - dq).norm() < 1e-15);
  p.act(-dq);
  const Frame b = p.observe();
  REQUIRE(a.features.size() == b.features.size());
  for (std::size_t i = 0; i < a.features.size(); ++i) {
    CHECK(a.features[i].coords.u == doctest::Approx(b.features[i].coords.u).epsilon(1e-9));
  }
}

TEST_CASE("serial arm plant") {
  const auto& cs = scenes()[0];
  const Isometry3d g = solve_goal_pose(cs.scene, cs.goal, 0.0);
  SerialArmPlant arm(cs.scene, cs.goal, g, 1);
  CHECK(arm.dof() == 4);
  CHECK(arm.tool_pose().isApprox(g, 1e-9));
  CHECK(arm.oracle_errors()->at(ConstraintType::kPointToPoint).norm() < 1e-6);
  Eigen::Vector4d dq(0.05, -0.05, 0.02, 0.01);
  arm.act(dq);
  CHECK_FALSE(arm.tool_pose().isApprox(g, 1e-6));
  arm.act(-dq);
  CHECK(arm.tool_pose().isApprox(g, 1e-9));
}

}  // TEST_SUITE
