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

#include "covgs/pipeline.hpp"

#include <numbers>
#include <set>

#include "covgs/errors.hpp"
#include "covgs/rng.hpp"

namespace covgs {
namespace {

std::string tag(const char* prefix, int a, int b = -1) {
  std::string s = std::string(prefix) + "." + std::to_string(a);
  if (b >= 0) s += "." + std::to_string(b);
  return s;
}

std::vector<DemoVideo> demos_for(const RunConfig& config, const CategoryScene& cs, const char* split, int count) {
  std::vector<DemoVideo> out;
  for (int k = 0; k < count; ++k) {
    const std::uint64_t seed = derive_seed(config.seed, tag((std::string("sim.demo.") + split).c_str(),
                                                            cs.category_id, k));
    Rng rng(seed);
    const int n = std::uniform_int_distribution<int>(config.sim.frames_min, config.sim.frames_max)(rng);
    DemoVideo v = generate_demo(cs.scene, cs.goal, n, mix_seed(seed, 7), config.sim.demo);
    v.video_id = "cat" + std::to_string(cs.category_id) + "_" + split + "_" + std::to_string(k);
    out.push_back(std::move(v));
  }
  return out;
}

}  // namespace

std::vector<CategoryScene> build_scenes(const RunConfig& config) {
  std::vector<CategoryScene> scenes;
  const TargetModel nail =
      make_nail(config.sim.tool, config.sim.background_points, derive_seed(config.seed, "sim.target"));
  const int total = config.sim.train_categories + config.sim.heldout_categories;
  for (int c = 0; c < total; ++c) {
    CategoryScene cs;
    cs.category_id = c;
    cs.trained = c < config.sim.train_categories;
    cs.scene.tool = generate_category(derive_seed(config.seed, tag("sim.category", c)), c, config.sim.tool);
    cs.scene.target = nail;
    cs.scene.noise = config.sim.noise;
    cs.goal = hammering_goal(cs.scene);
    scenes.push_back(std::move(cs));
  }
  return scenes;
}

DemoSet generate_demo_set(const RunConfig& config, const std::vector<CategoryScene>& scenes) {
  DemoSet set;
  for (const auto& cs : scenes) {
    if (cs.trained) {
      auto tr = demos_for(config, cs, "train", config.sim.videos_per_category);
      auto ev = demos_for(config, cs, "eval", config.sim.eval_videos_per_category);
      set.train.insert(set.train.end(), tr.begin(), tr.end());
      set.eval.insert(set.eval.end(), ev.begin(), ev.end());
    } else {
      auto ho = demos_for(config, cs, "heldout", config.sim.heldout_videos);
      set.heldout.insert(set.heldout.end(), ho.begin(), ho.end());
    }
  }
  return set;
}

EnumerationLimits effective_limits(const RunConfig& config) {
  EnumerationLimits lim = config.enumeration;
  lim.seed = derive_seed(config.seed, "enumeration");
  return lim;
}

TrainConfig effective_train_config(const RunConfig& config) {
  TrainConfig t = config.train;
  t.seed = derive_seed(config.seed, "train");
  t.limits = effective_limits(config);
  t.hyper.descriptor_dim = config.sim.tool.descriptor_dim;
  return t;
}

TrainOutput train_model(const RunConfig& config, std::span<const DemoVideo> videos,
                        const ModelCheckpointFn& checkpoint) {
  const TrainConfig tc = effective_train_config(config);
  TrainOutput out;
  std::set<int> cats;
  for (const auto& v : videos) cats.insert(v.category_id);
  out.model.trained_categories.assign(cats.begin(), cats.end());
  if (!videos.empty()) {
    const auto& f = videos.front().frames;
    for (const auto& fr : f) {
      if (!fr.features.empty()) {
        const auto dim = static_cast<int>(fr.features.front().descriptor.size());
        if (dim != tc.hyper.descriptor_dim) {
          throw Error(ErrorKind::kDimensionMismatch, "demo descriptor dimension " + std::to_string(dim) +
                                                         " differs from sim.descriptor_dim " +
                                                         std::to_string(tc.hyper.descriptor_dim));
        }
        break;
      }
    }
  }
  for (auto ct : config.train_ctypes) {
    CheckpointFn cb;
    if (checkpoint) cb = [&, ct](int it, const TaskFunctionParams& p) { checkpoint(ct, it, p); };
    TrainResult r = covgs_il(videos, tc, ct, cb);
    out.metrics[ct] = std::move(r.metrics);
    if (r.aborted) out.abort_reason[ct] = r.abort_reason;
    out.model.task_functions.emplace(ct, std::move(r.params));
  }
  return out;
}

std::unique_ptr<InstanceSelector> make_random_selector(const RunConfig& config, bool per_frame) {
  return std::make_unique<RandomSelector>(derive_seed(config.seed, "eval.random"), effective_limits(config),
                                          per_frame);
}

CorrespondenceAnalysis correspondence_analysis(const RunConfig& config, const Model& model,
                                               std::span<const DemoVideo> videos, ConstraintType ctype,
                                               int steps) {
  auto it = model.task_functions.find(ctype);
  if (it == model.task_functions.end()) {
    throw Error(ErrorKind::kConfig, "model has no " + std::string(short_name(ctype)) + " task function");
  }
  std::map<int, const DemoVideo*> first;
  for (const auto& v : videos) first.emplace(v.category_id, &v);
  std::vector<DemoVideo> rows;
  CorrespondenceAnalysis out;
  out.ctype = ctype;
  for (const auto& [cat, v] : first) {
    rows.push_back(*v);
    out.rows.push_back(v->video_id);
  }
  TaskFunctionSelector selector(model.task_functions, effective_limits(config), config.train.tau);
  auto random = make_random_selector(config, true);
  out.model = correspondence_matrix(it->second, selector, rows, ctype, steps);
  out.random = correspondence_matrix(it->second, *random, rows, ctype, steps);
  out.model_dispersion = column_dispersion(out.model);
  out.random_dispersion = column_dispersion(out.random);
  return out;
}

std::vector<ServoTrial> run_servo_trials(const RunConfig& config, const CategoryScene& cs,
                                         InstanceSelector& selector, int trials) {
  std::vector<ServoTrial> out;
  const auto thresholds = stacked_thresholds(config.servo, config.servo.ctypes);
  for (int k = 0; k < trials; ++k) {
    ServoTrial trial;
    trial.category_id = cs.category_id;
    trial.trial = k;
    const std::uint64_t seed = derive_seed(config.seed, tag("servo.trial", cs.category_id, k));
    try {
      Rng rng(seed);
      const double yaw = std::uniform_real_distribution<double>(-config.sim.demo.yaw_range_deg,
                                                                config.sim.demo.yaw_range_deg)(rng) *
                         std::numbers::pi / 180.0;
      const Eigen::Isometry3d goal = solve_goal_pose(cs.scene, cs.goal, yaw);
      const Eigen::Isometry3d start = sample_start_pose(goal, config.sim.demo, mix_seed(seed, 1));
      std::unique_ptr<ServoPlant> plant;
      if (config.robot == "arm") {
        plant = std::make_unique<SerialArmPlant>(cs.scene, cs.goal, start, mix_seed(seed, 2));
      } else {
        plant = std::make_unique<TwistPlant>(cs.scene, cs.goal, start, mix_seed(seed, 2));
      }
      ServoConfig sc = config.servo;
      sc.bridge_frames = config.bridge_frames;
      trial.trace = servo_loop(*plant, selector, sc);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::kConfig) throw;
      trial.trace.status = ServoStatus::kPlantFault;
      trial.trace.message = e.what();
    }
    trial.success = trial_succeeded(trial.trace, thresholds);
    out.push_back(std::move(trial));
  }
  return out;
}

}  // namespace covgs
