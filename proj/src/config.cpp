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

#include "covgs/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "covgs/errors.hpp"

namespace covgs {
namespace {

using nlohmann::json;

struct Writer {
  json& j;

  template <class T>
  void operator()(const char* key, T& value) {
    j[key] = value;
  }
  void operator()(const char* key, Eigen::Vector3d& value) { j[key] = {value.x(), value.y(), value.z()}; }
  void operator()(const char* key, std::vector<ConstraintType>& value) {
    json arr = json::array();
    for (auto ct : value) arr.push_back(std::string(short_name(ct)));
    j[key] = arr;
  }
  Writer section(const char* key) {
    j[key] = json::object();
    return Writer{j[key]};
  }
  void finish() {}
};

struct Reader {
  const json& j;
  std::string path;
  std::set<std::string> seen;

  Reader(const json& node, std::string p) : j(node), path(std::move(p)) {
    if (!j.is_object()) throw Error(ErrorKind::kConfig, "'" + path + "' must be an object");
  }

  std::string where(const char* key) const { return path.empty() ? key : path + "." + key; }

  template <class T>
  void operator()(const char* key, T& value) {
    seen.insert(key);
    if (!j.contains(key)) return;
    try {
      value = j.at(key).get<T>();
    } catch (const json::exception&) {
      throw Error(ErrorKind::kConfig, "bad value for '" + where(key) + "'");
    }
  }
  void operator()(const char* key, Eigen::Vector3d& value) {
    std::vector<double> v(3);
    (*this)(key, v);
    if (v.size() != 3) throw Error(ErrorKind::kConfig, "'" + where(key) + "' needs three numbers");
    value = Eigen::Vector3d(v[0], v[1], v[2]);
  }
  void operator()(const char* key, std::vector<ConstraintType>& value) {
    std::vector<std::string> names;
    for (auto ct : value) names.emplace_back(short_name(ct));
    (*this)(key, names);
    value.clear();
    for (const auto& n : names) value.push_back(parse_constraint_type(n));
  }
  Reader section(const char* key) {
    seen.insert(key);
    static const json empty = json::object();
    return Reader(j.contains(key) ? j.at(key) : empty, where(key));
  }
  void finish() {
    for (const auto& [k, _] : j.items()) {
      if (!seen.count(k)) throw Error(ErrorKind::kConfig, "unknown config key '" + where(k.c_str()) + "'");
    }
  }
};

template <class V>
void visit(V& v, RunConfig& c) {
  v("seed", c.seed);
  {
    auto s = v.section("sim");
    SimConfig& m = c.sim;
    s("train_categories", m.train_categories);
    s("heldout_categories", m.heldout_categories);
    s("videos_per_category", m.videos_per_category);
    s("heldout_videos", m.heldout_videos);
    s("eval_videos_per_category", m.eval_videos_per_category);
    s("frames_min", m.frames_min);
    s("frames_max", m.frames_max);
    s("background_points", m.background_points);
    s("descriptor_dim", m.tool.descriptor_dim);
    s("min_distractors", m.tool.min_distractors);
    s("max_distractors", m.tool.max_distractors);
    s("prototype_min_cosine", m.tool.prototype_min_cosine);
    s("descriptor_noise", m.tool.descriptor_noise);
    s("pixel_sigma", m.noise.pixel_sigma);
    s("dropout", m.noise.dropout);
    s("pose_sigma_pos", m.demo.pose_sigma_pos);
    s("pose_sigma_rot_deg", m.demo.pose_sigma_rot_deg);
    s("yaw_range_deg", m.demo.yaw_range_deg);
    s("start_offset_min", m.demo.start_offset_min);
    s("start_offset_max", m.demo.start_offset_max);
    s("start_inplane_deg", m.demo.start_inplane_deg);
    s("start_inplane_min_deg", m.demo.start_inplane_min_deg);
    s("start_tilt_deg", m.demo.start_tilt_deg);
    s.finish();
  }
  {
    auto s = v.section("enumeration");
    s("max_instances", c.enumeration.max_instances);
    s("cross_segment_only", c.enumeration.cross_segment_only);
    s.finish();
  }
  {
    auto s = v.section("train");
    TrainConfig& t = c.train;
    s("ctypes", c.train_ctypes);
    s("alpha", t.alpha);
    s("ll_error_scale", t.ll_error_scale);
    s("beta", t.beta);
    s("outer_iters", t.outer_iters);
    s("temporal_steps", t.temporal_steps);
    s("similarity_steps", t.similarity_steps);
    s("lr_temporal", t.lr_temporal);
    s("lr_similarity", t.lr_similarity);
    s("optimizer", t.optimizer);
    s("adam_beta1", t.adam_beta1);
    s("adam_beta2", t.adam_beta2);
    s("adam_eps", t.adam_eps);
    s("batch_size", t.batch_size);
    s("stride", t.stride);
    s("tau", t.tau);
    s("top_p", t.top_p);
    s("hidden", t.hyper.hidden);
    s("embedding", t.hyper.embedding);
    s("rounds", t.hyper.rounds);
    s("checkpoint_every", t.checkpoint_every);
    s.finish();
  }
  {
    auto s = v.section("selection");
    s("bridge_frames", c.bridge_frames);
    s.finish();
  }
  {
    auto s = v.section("servo");
    ServoConfig& sv = c.servo;
    s("gain", sv.gain);
    s("broyden_step", sv.broyden_step);
    s("deltas", sv.deltas);
    s("max_iters", sv.max_iters);
    s("pp_threshold", sv.pp_threshold);
    s("ll_threshold", sv.ll_threshold);
    s("pl_threshold", sv.pl_threshold);
    s("damping", sv.damping);
    s("ll_scale", sv.ll_scale);
    s("ctypes", sv.ctypes);
    s("divergence_factor", sv.divergence_factor);
    s("divergence_window", sv.divergence_window);
    s("settle_steps", sv.settle_steps);
    s("broyden_min_step", sv.broyden_min_step);
    s("max_step", sv.max_step);
    s("normalize_joints", sv.normalize_joints);
    s("missing_limit", sv.missing_limit);
    s("trials", c.servo_trials);
    s("robot", c.robot);
    s.finish();
  }
  v.finish();
}

}  // namespace

void RunConfig::validate() const {
  auto need = [](bool ok, const char* what) {
    if (!ok) throw Error(ErrorKind::kConfig, what);
  };
  need(sim.train_categories >= 2, "sim.train_categories must be at least 2");
  need(sim.heldout_categories >= 0, "sim.heldout_categories must be non-negative");
  need(sim.videos_per_category >= 1, "sim.videos_per_category must be positive");
  need(sim.heldout_videos >= 0 && sim.eval_videos_per_category >= 0, "video counts must be non-negative");
  need(sim.frames_min >= 2 && sim.frames_max >= sim.frames_min, "sim.frames_min/frames_max out of range");
  need(sim.background_points >= 0 && sim.background_points < 90, "sim.background_points out of range");
  need(sim.tool.descriptor_dim >= 1, "sim.descriptor_dim must be positive");
  need(sim.tool.min_distractors >= 0 && sim.tool.max_distractors >= sim.tool.min_distractors,
       "sim.min_distractors/max_distractors out of range");
  need(sim.tool.max_distractors + 3 < kToolIdBase, "sim.max_distractors too large");
  need(sim.tool.prototype_min_cosine > -1.0 && sim.tool.prototype_min_cosine < 1.0,
       "sim.prototype_min_cosine must lie in (-1, 1)");
  need(sim.tool.descriptor_noise >= 0.0, "sim.descriptor_noise must be non-negative");
  need(sim.noise.pixel_sigma >= 0.0, "sim.pixel_sigma must be non-negative");
  need(sim.noise.dropout >= 0.0 && sim.noise.dropout <= 1.0, "sim.dropout must lie in [0, 1]");
  need(enumeration.max_instances >= 1, "enumeration.max_instances must be positive");
  need(!train_ctypes.empty(), "train.ctypes must not be empty");
  need(bridge_frames >= 0, "selection.bridge_frames must be non-negative");
  need(servo_trials >= 0, "servo.trials must be non-negative");
  need(robot == "twist" || robot == "arm", "servo.robot must be 'twist' or 'arm'");
  train.validate();
  servo.validate();
}

std::string dump_run_config(const RunConfig& config) {
  json j = json::object();
  Writer w{j};
  RunConfig copy = config;
  visit(w, copy);
  return j.dump(2) + "\n";
}

RunConfig parse_run_config(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::kConfig, std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig c;
  Reader r(j, "");
  visit(r, c);
  c.train.hyper.descriptor_dim = c.sim.tool.descriptor_dim;
  c.validate();
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kConfig, "cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

}  // namespace covgs
