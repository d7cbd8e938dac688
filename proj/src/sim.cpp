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

#include "covgs/sim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <utility>
#include <array>
#include <string>

#include "covgs/errors.hpp"
#include "covgs/rng.hpp"

namespace covgs {
namespace {

using Eigen::AngleAxisd;
using Eigen::Isometry3d;
using Eigen::Matrix3d;
using Eigen::Quaterniond;
using Eigen::Vector3d;
using Eigen::VectorXd;

constexpr double kDeg = std::numbers::pi / 180.0;

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

VectorXd random_unit(Rng& rng, int dim) {
  std::normal_distribution<double> n(0.0, 1.0);
  VectorXd v(dim);
  do {
    for (int i = 0; i < dim; ++i) v[i] = n(rng);
  } while (v.norm() < 1e-9);
  return v.normalized();
}

VectorXd near_prototype(Rng& rng, const VectorXd& proto, const HammerTemplate& tmpl) {
  std::normal_distribution<double> n(0.0, tmpl.descriptor_noise / std::sqrt(static_cast<double>(proto.size())));
  for (;;) {
    VectorXd v = proto;
    for (int i = 0; i < v.size(); ++i) v[i] += n(rng);
    v.normalize();
    if (v.dot(proto) >= tmpl.prototype_min_cosine) return v;
  }
}

// Prototype descriptors shared by every category: 0 face, 1 edge a, 2 edge b,
// 3 nail top, 4 nail line a, 5 nail line b.
VectorXd prototype(const HammerTemplate& tmpl, int role) {
  Rng rng(derive_seed(tmpl.prototype_seed, "prototype." + std::to_string(role)));
  return random_unit(rng, tmpl.descriptor_dim);
}

std::uint64_t pose_hash(const Isometry3d& pose) {
  std::uint64_t h = 0x1234;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 4; ++j) {
      const auto q = static_cast<std::int64_t>(std::llround(pose.matrix()(i, j) * 1e9));
      h = mix_seed(h, static_cast<std::uint64_t>(q));
    }
  }
  return h;
}

bool project(const Camera& cam, const Vector3d& world, PixelPoint* out) {
  const Vector3d pc = cam.world_to_camera * world;
  if (pc.z() <= 1e-6) return false;
  out->u = cam.fx * pc.x() / pc.z() + cam.cx;
  out->v = cam.fy * pc.y() / pc.z() + cam.cy;
  return true;
}

PixelPoint project_or_throw(const Camera& cam, const Vector3d& world, int id) {
  PixelPoint p;
  if (!project(cam, world, &p)) {
    throw Error(ErrorKind::kBehindCamera, "feature " + std::to_string(id) + " is behind the camera");
  }
  return p;
}

const BodyPoint& find_point(const std::vector<BodyPoint>& pts, int id) {
  for (const auto& p : pts)
    if (p.id == id) return p;
  throw Error(ErrorKind::kData, "unknown feature id " + std::to_string(id));
}

// World position of a feature id at the given tool pose.
Vector3d world_of(const Scene& scene, const Isometry3d& tool_pose, int id) {
  if (id >= kToolIdBase) return tool_pose * find_point(scene.tool.points, id).position;
  return find_point(scene.target.points, id).position;
}

Matrix3d skew(const Vector3d& w) {
  Matrix3d s;
  s << 0, -w.z(), w.y(), w.z(), 0, -w.x(), -w.y(), w.x(), 0;
  return s;
}

}  // namespace

RigidObjectModel generate_category(std::uint64_t seed, int category_id, const HammerTemplate& tmpl) {
  Rng rng(seed);
  RigidObjectModel m;
  m.category_id = category_id;
  const double head_len = uniform(rng, tmpl.head_length_min, tmpl.head_length_max);
  const double hw = uniform(rng, tmpl.head_half_width_min, tmpl.head_half_width_max);
  const double handle = uniform(rng, tmpl.handle_length_min, tmpl.handle_length_max);

  int next_id = kToolIdBase;
  m.face_id = next_id++;
  m.points.push_back({m.face_id, Vector3d::Zero(), near_prototype(rng, prototype(tmpl, 0), tmpl),
                      FeatureRole::kTaskPoint});
  m.edge_a_id = next_id++;
  m.points.push_back({m.edge_a_id, Vector3d(hw, -0.004, 0.0), near_prototype(rng, prototype(tmpl, 1), tmpl),
                      FeatureRole::kTaskLineEndpoint});
  m.edge_b_id = next_id++;
  m.points.push_back({m.edge_b_id, Vector3d(hw, -head_len + 0.004, 0.0),
                      near_prototype(rng, prototype(tmpl, 2), tmpl), FeatureRole::kTaskLineEndpoint});

  const int n_distractors =
      tmpl.max_distractors <= 0
          ? 0
          : std::uniform_int_distribution<int>(std::max(0, tmpl.min_distractors), tmpl.max_distractors)(rng);
  for (int i = 0; i < n_distractors; ++i) {
    Vector3d pos;
    for (;;) {
      if (uniform(rng, 0.0, 1.0) < 0.6) {
        pos = Vector3d(uniform(rng, hw + 0.01, hw + handle), -head_len / 2 + uniform(rng, -0.01, 0.01),
                       uniform(rng, -0.025, 0.025));
      } else {
        pos = Vector3d(uniform(rng, -hw, hw), uniform(rng, -head_len, 0.0), uniform(rng, -0.025, 0.025));
      }
      bool clear = true;
      for (const auto& p : m.points) clear = clear && (p.position - pos).norm() >= 0.006;
      if (clear) break;
    }
    m.points.push_back({next_id++, pos, random_unit(rng, tmpl.descriptor_dim), FeatureRole::kDistractor});
  }
  // Unit-variance components.
  for (auto& p : m.points) p.descriptor *= std::sqrt(static_cast<double>(tmpl.descriptor_dim));
  return m;
}

TargetModel make_nail(const HammerTemplate& tmpl, int background_points, std::uint64_t seed) {
  Rng rng(seed);
  TargetModel t;
  const Vector3d axis_top(0.0, 0.04, 0.5);
  t.top_id = 0;
  t.line_a_id = 1;
  t.line_b_id = 2;
  t.points.push_back({0, axis_top + Vector3d(0.01, 0.0, 0.0), prototype(tmpl, 3), FeatureRole::kTaskPoint});
  t.points.push_back({1, axis_top + Vector3d(0.0, 0.02, 0.0), prototype(tmpl, 4), FeatureRole::kTaskLineEndpoint});
  t.points.push_back({2, axis_top + Vector3d(0.0, 0.09, 0.0), prototype(tmpl, 5), FeatureRole::kTaskLineEndpoint});
  for (int i = 0; i < background_points; ++i) {
    Vector3d pos;
    for (;;) {
      pos = Vector3d(uniform(rng, -0.12, 0.12), uniform(rng, 0.0, 0.16), 0.52);
      bool clear = true;
      for (const auto& p : t.points) clear = clear && (p.position - pos).norm() >= 0.05;
      if (clear) break;
    }
    t.points.push_back({3 + i, pos, random_unit(rng, tmpl.descriptor_dim), FeatureRole::kDistractor});
  }
  for (auto& p : t.points) p.descriptor *= std::sqrt(static_cast<double>(tmpl.descriptor_dim));
  return t;
}

GoalSpec hammering_goal(const Scene& scene) {
  return {{scene.tool.face_id, scene.target.top_id},
          {scene.tool.edge_a_id, scene.tool.edge_b_id, scene.target.line_a_id, scene.target.line_b_id}};
}

GroundTruth ground_truth_of(const GoalSpec& goal) {
  GroundTruth gt;
  if (!goal.pp.empty()) gt.bindings[ConstraintType::kPointToPoint] = goal.pp;
  if (!goal.ll.empty()) gt.bindings[ConstraintType::kLineToLine] = goal.ll;
  return gt;
}

Frame render_frame(const Scene& scene, const Isometry3d& tool_pose, std::uint64_t noise_seed, int frame_index) {
  Frame f;
  f.index = frame_index;
  const auto& cam = scene.camera;
  auto emit = [&](const BodyPoint& bp, const Vector3d& world, int segment) {
    PixelPoint px = project_or_throw(cam, world, bp.id);
    SplitMix64 rng(mix_seed(noise_seed, static_cast<std::uint64_t>(bp.id)));
    const double drop = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    if (drop < scene.noise.dropout) return;
    if (scene.noise.pixel_sigma > 0.0) {
      std::normal_distribution<double> n(0.0, scene.noise.pixel_sigma);
      px.u += n(rng);
      px.v += n(rng);
    }
    if (px.u < 0.0 || px.u >= cam.width || px.v < 0.0 || px.v >= cam.height) return;
    f.features.push_back({bp.id, bp.descriptor, px, segment});
  };
  for (const auto& bp : scene.target.points) emit(bp, bp.position, kTargetSegment);
  for (const auto& bp : scene.tool.points) emit(bp, tool_pose * bp.position, kToolSegment);
  std::sort(f.features.begin(), f.features.end(),
            [](const FeaturePoint& a, const FeaturePoint& b) { return a.id < b.id; });
  return f;
}

std::map<ConstraintType, ErrorVector> goal_errors(const Scene& scene, const GoalSpec& goal,
                                                  const Isometry3d& tool_pose) {
  std::map<ConstraintType, ErrorVector> out;
  auto px = [&](int id) { return project_or_throw(scene.camera, world_of(scene, tool_pose, id), id); };
  if (goal.pp.size() == 2) out[ConstraintType::kPointToPoint] = pp_error(px(goal.pp[0]), px(goal.pp[1]));
  if (goal.ll.size() == 4) {
    out[ConstraintType::kLineToLine] = ll_error(line_from_points(px(goal.ll[0]), px(goal.ll[1])),
                                                line_from_points(px(goal.ll[2]), px(goal.ll[3])));
  }
  return out;
}

Isometry3d solve_goal_pose(const Scene& scene, const GoalSpec& goal, double yaw) {
  if (goal.pp.size() != 2 || goal.ll.size() != 4) {
    throw Error(ErrorKind::kInfeasibleGoal, "hammering goal needs one PP and one LL binding");
  }
  const auto& tool = scene.tool.points;
  const auto& target = scene.target.points;
  const Vector3d face = find_point(tool, goal.pp[0]).position;
  const Vector3d d_obj = (find_point(tool, goal.ll[1]).position - find_point(tool, goal.ll[0]).position).normalized();
  const Vector3d d_world =
      (find_point(target, goal.ll[2]).position - find_point(target, goal.ll[3]).position).normalized();
  const Matrix3d r0 = Quaterniond::FromTwoVectors(d_obj, d_world).toRotationMatrix();
  Isometry3d pose = Isometry3d::Identity();
  pose.linear() = AngleAxisd(yaw, d_world).toRotationMatrix() * r0;
  pose.translation() = find_point(target, goal.pp[1]).position - pose.linear() * face;
  for (const auto& p : tool) {
    const Vector3d pc = scene.camera.world_to_camera * (pose * p.position);
    if (pc.z() <= 1e-6) {
      throw Error(ErrorKind::kInfeasibleGoal, "goal pose puts tool feature " + std::to_string(p.id) +
                                                  " behind the camera");
    }
  }
  return pose;
}

Isometry3d sample_start_pose(const Isometry3d& goal_pose, const DemoOptions& opt, std::uint64_t seed) {
  Rng rng(seed);
  Vector3d dt;
  for (int i = 0; i < 3; ++i) dt[i] = uniform(rng, opt.start_offset_min[i], opt.start_offset_max[i]);
  const double sign = uniform(rng, 0.0, 1.0) < 0.5 ? -1.0 : 1.0;
  const double inplane = sign * uniform(rng, opt.start_inplane_min_deg, opt.start_inplane_deg) * kDeg;
  const double tx = uniform(rng, -opt.start_tilt_deg, opt.start_tilt_deg) * kDeg;
  const double ty = uniform(rng, -opt.start_tilt_deg, opt.start_tilt_deg) * kDeg;
  Isometry3d start = goal_pose;
  start.linear() = (AngleAxisd(inplane, Vector3d::UnitZ()) * AngleAxisd(tx, Vector3d::UnitX()) *
                    AngleAxisd(ty, Vector3d::UnitY()))
                       .toRotationMatrix() *
                   goal_pose.linear();
  start.translation() = goal_pose.translation() + dt;
  return start;
}

DemoVideo generate_demo(const Scene& scene, const GoalSpec& goal, int n_frames, std::uint64_t seed,
                        const DemoOptions& opt) {
  if (n_frames < 2) throw Error(ErrorKind::kConfig, "a demonstration needs at least two frames");
  Rng rng(seed);
  const double yaw = uniform(rng, -opt.yaw_range_deg, opt.yaw_range_deg) * kDeg;
  const Isometry3d goal_pose = solve_goal_pose(scene, goal, yaw);
  const Isometry3d start = sample_start_pose(goal_pose, opt, mix_seed(seed, 1));
  const Quaterniond q0(start.linear()), q1(goal_pose.linear());

  // Low-frequency perturbation per pose coordinate, unit RMS.
  struct Wave {
    double f1, p1, f2, p2;
  };
  std::array<Wave, 6> waves{};
  for (auto& w : waves) {
    w = {uniform(rng, 0.5, 2.0), uniform(rng, 0.0, 2 * std::numbers::pi), uniform(rng, 0.5, 2.0),
         uniform(rng, 0.0, 2 * std::numbers::pi)};
  }
  auto xi = [&](int i, double t) {
    const auto& w = waves[i];
    return std::sin(2 * std::numbers::pi * w.f1 * t + w.p1) + std::sin(2 * std::numbers::pi * w.f2 * t + w.p2);
  };

  DemoVideo video;
  video.category_id = scene.tool.category_id;
  video.ground_truth = ground_truth_of(goal);
  for (int k = 0; k < n_frames; ++k) {
    const double t = static_cast<double>(k) / (n_frames - 1);
    const double s = t * t * (3.0 - 2.0 * t);
    const double taper = 4.0 * s * (1.0 - s);
    Isometry3d pose = Isometry3d::Identity();
    Vector3d dpos, drot;
    for (int i = 0; i < 3; ++i) {
      dpos[i] = opt.pose_sigma_pos * taper * xi(i, t);
      drot[i] = opt.pose_sigma_rot_deg * kDeg * taper * xi(3 + i, t);
    }
    const Matrix3d noise_rot =
        drot.norm() > 0 ? AngleAxisd(drot.norm(), drot.normalized()).toRotationMatrix() : Matrix3d::Identity();
    pose.linear() = noise_rot * q0.slerp(s, q1).toRotationMatrix();
    pose.translation() = start.translation() + s * (goal_pose.translation() - start.translation()) + dpos;
    if (k == n_frames - 1) pose = goal_pose;
    video.frames.push_back(render_frame(scene, pose, mix_seed(seed, 1000 + static_cast<std::uint64_t>(k)), k));
  }
  return video;
}

Isometry3d se3_exp(const Eigen::Matrix<double, 6, 1>& twist) {
  const Vector3d v = twist.head<3>();
  const Vector3d w = twist.tail<3>();
  const double th = w.norm();
  Isometry3d T = Isometry3d::Identity();
  if (th < 1e-12) {
    T.translation() = v;
    return T;
  }
  const Matrix3d W = skew(w);
  T.linear() = AngleAxisd(th, w / th).toRotationMatrix();
  const Matrix3d V = Matrix3d::Identity() + (1.0 - std::cos(th)) / (th * th) * W +
                     (th - std::sin(th)) / (th * th * th) * W * W;
  T.translation() = V * v;
  return T;
}

TwistPlant::TwistPlant(Scene scene, GoalSpec goal, const Isometry3d& initial_pose, std::uint64_t noise_seed)
    : scene_(std::move(scene)), goal_(std::move(goal)), pose_(initial_pose), noise_seed_(noise_seed) {}

Frame TwistPlant::observe() { return render_frame(scene_, pose_, mix_seed(noise_seed_, pose_hash(pose_))); }

void TwistPlant::act(const VectorXd& dq) {
  if (dq.size() != 6) throw Error(ErrorKind::kPlantFault, "twist plant expects 6 joint deltas");
  if (!dq.allFinite()) throw Error(ErrorKind::kPlantFault, "non-finite command");
  Eigen::Matrix<double, 6, 1> tw = dq;
  const double nt = tw.head<3>().norm(), nr = tw.tail<3>().norm();
  if (nt > max_translation_step) {
    tw.head<3>() *= max_translation_step / nt;
    ++clamps_;
  }
  if (nr > max_rotation_step) {
    tw.tail<3>() *= max_rotation_step / nr;
    ++clamps_;
  }
  pose_ = pose_ * se3_exp(tw);
  q_ += tw;
}

VectorXd TwistPlant::probe_deltas() const {
  VectorXd d(6);
  d << 0.025, 0.025, 0.025, 0.12, 0.12, 0.12;
  return d;
}

std::optional<std::map<ConstraintType, ErrorVector>> TwistPlant::oracle_errors() const {
  return goal_errors(scene_, goal_, pose_);
}

SerialArmPlant::SerialArmPlant(Scene scene, GoalSpec goal, const Isometry3d& initial_pose, std::uint64_t noise_seed)
    : scene_(std::move(scene)), goal_(std::move(goal)), noise_seed_(noise_seed) {
  base_ = initial_pose.translation() + Vector3d(0.45, -0.2, 0.0);
  // Planar two-link inverse kinematics placing the flange just beyond the
  // tool origin on the handle side; the grasp absorbs the remainder.
  const Vector3d target = initial_pose.translation() + Vector3d(0.12, -0.03, 0.0);
  const double x = target.x() - base_.x(), y = target.y() - base_.y();
  const double r2 = x * x + y * y;
  double c2 = (r2 - link1_ * link1_ - link2_ * link2_) / (2 * link1_ * link2_);
  c2 = std::clamp(c2, -1.0, 1.0);
  const double q2 = std::acos(c2);
  const double q1 = std::atan2(y, x) - std::atan2(link2_ * std::sin(q2), link1_ + link2_ * std::cos(q2));
  q_ = Eigen::Vector4d(0.0, q1, q2, 0.0);
  grasp_ = flange(q_).inverse() * initial_pose;
}

Isometry3d SerialArmPlant::flange(const Eigen::Vector4d& q) const {
  Isometry3d T = Isometry3d::Identity();
  T.translation() = base_;
  T.rotate(AngleAxisd(q[0], Vector3d::UnitY()));
  T.rotate(AngleAxisd(q[1], Vector3d::UnitZ()));
  T.translate(Vector3d(link1_, 0, 0));
  T.rotate(AngleAxisd(q[2], Vector3d::UnitZ()));
  T.translate(Vector3d(link2_, 0, 0));
  T.rotate(AngleAxisd(q[3], Vector3d::UnitZ()));
  return T;
}

Isometry3d SerialArmPlant::tool_pose() const { return flange(q_) * grasp_; }

Frame SerialArmPlant::observe() {
  const Isometry3d pose = tool_pose();
  return render_frame(scene_, pose, mix_seed(noise_seed_, pose_hash(pose)));
}

void SerialArmPlant::act(const VectorXd& dq) {
  if (dq.size() != 4) throw Error(ErrorKind::kPlantFault, "arm plant expects 4 joint deltas");
  if (!dq.allFinite()) throw Error(ErrorKind::kPlantFault, "non-finite command");
  for (int i = 0; i < 4; ++i) {
    double v = q_[i] + dq[i];
    if (std::abs(v) > joint_limit) {
      v = std::clamp(v, -joint_limit, joint_limit);
      ++clamps_;
    }
    q_[i] = v;
  }
}

VectorXd SerialArmPlant::probe_deltas() const { return VectorXd::Constant(4, 0.2); }

std::optional<std::map<ConstraintType, ErrorVector>> SerialArmPlant::oracle_errors() const {
  return goal_errors(scene_, goal_, tool_pose());
}

}  // namespace covgs
