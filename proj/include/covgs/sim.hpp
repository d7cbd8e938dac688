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

// Deterministic synthetic hammering world: categorical hammer generator,
// pinhole rendering of feature tracks, demonstrations and servo plants.

#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "covgs/demo.hpp"
#include "covgs/graphspec.hpp"

namespace covgs {

enum class FeatureRole { kTaskPoint, kTaskLineEndpoint, kDistractor };

struct BodyPoint {
  int id = 0;
  Eigen::Vector3d position = Eigen::Vector3d::Zero();  // object frame (tool) or world (target)
  Eigen::VectorXd descriptor;
  FeatureRole role = FeatureRole::kDistractor;
};

struct RigidObjectModel {
  int category_id = 0;
  std::vector<BodyPoint> points;
  int face_id = -1;    // striking-face centre, the object-frame origin
  int edge_a_id = -1;  // head edge endpoint near the face
  int edge_b_id = -1;  // head edge endpoint far from the face
};

struct HammerTemplate {
  int descriptor_dim = 16;
  int min_distractors = 5;
  int max_distractors = 15;
  double head_length_min = 0.05, head_length_max = 0.08;
  double head_half_width_min = 0.012, head_half_width_max = 0.02;
  double handle_length_min = 0.16, handle_length_max = 0.24;
  // Functional descriptors are prototype + noise, rejected unless their
  // cosine to the prototype is at least this (pairwise >= 0.8 follows).
  double prototype_min_cosine = 0.95;
  double descriptor_noise = 0.2;
  std::uint64_t prototype_seed = 0x5eed;
};

/// Ids 0..99 are reserved for the target; tool points start at 100.
inline constexpr int kToolIdBase = 100;
inline constexpr int kToolSegment = 0;
inline constexpr int kTargetSegment = 1;

RigidObjectModel generate_category(std::uint64_t seed, int category_id, const HammerTemplate& tmpl = {});

struct TargetModel {
  std::vector<BodyPoint> points;  // world frame
  int top_id = -1;
  int line_a_id = -1;  // upper body point
  int line_b_id = -1;  // lower body point
};

TargetModel make_nail(const HammerTemplate& tmpl, int background_points, std::uint64_t seed);

struct Camera {
  double fx = 500.0, fy = 500.0, cx = 320.0, cy = 240.0;
  int width = 640, height = 480;
  Eigen::Isometry3d world_to_camera = Eigen::Isometry3d::Identity();
};

struct NoiseModel {
  double pixel_sigma = 0.5;
  double dropout = 0.02;
};

struct Scene {
  RigidObjectModel tool;
  TargetModel target;
  Camera camera;
  NoiseModel noise;
};

struct GoalSpec {
  std::vector<int> pp;  // tool face, target top
  std::vector<int> ll;  // tool edge a, b, target line a, b
};

GoalSpec hammering_goal(const Scene& scene);
GroundTruth ground_truth_of(const GoalSpec& goal);

/// Projects all visible points with jitter and dropout drawn from
/// `noise_seed` (per feature id). Throws BehindCamera.
Frame render_frame(const Scene& scene, const Eigen::Isometry3d& tool_pose, std::uint64_t noise_seed,
                   int frame_index = 0);

/// Exact, noise-free constraint errors of the goal bindings at a tool pose.
std::map<ConstraintType, ErrorVector> goal_errors(const Scene& scene, const GoalSpec& goal,
                                                  const Eigen::Isometry3d& tool_pose);

/// Pose with the face on the target top and the head edge parallel to the
/// nail body, rotated by `yaw` about the nail axis. Throws InfeasibleGoal.
Eigen::Isometry3d solve_goal_pose(const Scene& scene, const GoalSpec& goal, double yaw);

struct DemoOptions {
  double pose_sigma_pos = 0.002;      // m
  double pose_sigma_rot_deg = 0.5;
  double yaw_range_deg = 25.0;
  Eigen::Vector3d start_offset_min{-0.07, -0.09, -0.05};
  Eigen::Vector3d start_offset_max{0.07, -0.03, 0.05};
  double start_inplane_deg = 35.0;
  double start_inplane_min_deg = 10.0;
  double start_tilt_deg = 8.0;
};

/// Random start pose for a demonstration or a servo trial.
Eigen::Isometry3d sample_start_pose(const Eigen::Isometry3d& goal_pose, const DemoOptions& opt,
                                    std::uint64_t seed);

/// Smoothstep screw path from a random start to the goal.
DemoVideo generate_demo(const Scene& scene, const GoalSpec& goal, int n_frames, std::uint64_t seed,
                        const DemoOptions& opt = {});

/// Body twist (vx, vy, vz, wx, wy, wz) exponential.
Eigen::Isometry3d se3_exp(const Eigen::Matrix<double, 6, 1>& twist);

/// Plant interface used by the servo loop.
class ServoPlant {
 public:
  virtual ~ServoPlant() = default;
  virtual Frame observe() = 0;
  virtual void act(const Eigen::VectorXd& dq) = 0;
  virtual int dof() const = 0;
  virtual Eigen::VectorXd joints() const = 0;
  /// Default exploratory step per joint.
  virtual Eigen::VectorXd probe_deltas() const = 0;
  /// Ground-truth errors, when the plant knows them.
  virtual std::optional<std::map<ConstraintType, ErrorVector>> oracle_errors() const { return std::nullopt; }
  /// Number of commands clamped by joint or step limits.
  int clamp_count() const { return clamps_; }

 protected:
  int clamps_ = 0;
};

/// Direct 6-DOF control of the tool pose: each command is a body twist.
class TwistPlant : public ServoPlant {
 public:
  TwistPlant(Scene scene, GoalSpec goal, const Eigen::Isometry3d& initial_pose, std::uint64_t noise_seed);

  Frame observe() override;
  void act(const Eigen::VectorXd& dq) override;
  int dof() const override { return 6; }
  Eigen::VectorXd joints() const override { return q_; }
  Eigen::VectorXd probe_deltas() const override;
  std::optional<std::map<ConstraintType, ErrorVector>> oracle_errors() const override;

  const Eigen::Isometry3d& pose() const { return pose_; }

  double max_translation_step = 0.05;
  double max_rotation_step = 0.2;

 private:
  Scene scene_;
  GoalSpec goal_;
  Eigen::Isometry3d pose_;
  std::uint64_t noise_seed_;
  Eigen::VectorXd q_ = Eigen::VectorXd::Zero(6);
};

/// 4-joint arm: base yaw about the vertical axis, then three revolute joints
/// about the optical axis (shoulder, elbow, wrist) holding the tool.
class SerialArmPlant : public ServoPlant {
 public:
  SerialArmPlant(Scene scene, GoalSpec goal, const Eigen::Isometry3d& initial_pose, std::uint64_t noise_seed);

  Frame observe() override;
  void act(const Eigen::VectorXd& dq) override;
  int dof() const override { return 4; }
  Eigen::VectorXd joints() const override { return q_; }
  Eigen::VectorXd probe_deltas() const override;
  std::optional<std::map<ConstraintType, ErrorVector>> oracle_errors() const override;

  Eigen::Isometry3d tool_pose() const;

  double joint_limit = 2.9;

 private:
  Eigen::Isometry3d flange(const Eigen::Vector4d& q) const;

  Scene scene_;
  GoalSpec goal_;
  Eigen::Vector3d base_;
  double link1_ = 0.3, link2_ = 0.25;
  Eigen::Isometry3d grasp_;
  std::uint64_t noise_seed_;
  Eigen::Vector4d q_;
};

}  // namespace covgs
