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

// End-to-end stages shared by the command-line tool and the acceptance
// checks: scene construction, demo generation, training, evaluation and
// servo trials, all seeded from one RunConfig.

#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "covgs/config.hpp"
#include "covgs/eval.hpp"
#include "covgs/io.hpp"

namespace covgs {

struct CategoryScene {
  int category_id = 0;
  bool trained = true;
  Scene scene;
  GoalSpec goal;
};

/// Trained categories 0..T-1 followed by held-out ones.
std::vector<CategoryScene> build_scenes(const RunConfig& config);

struct DemoSet {
  std::vector<DemoVideo> train;    // videos_per_category per trained category
  std::vector<DemoVideo> eval;     // eval_videos_per_category per trained category
  std::vector<DemoVideo> heldout;  // heldout_videos per held-out category
};

DemoSet generate_demo_set(const RunConfig& config, const std::vector<CategoryScene>& scenes);

/// Training settings with seeds derived from the run seed.
TrainConfig effective_train_config(const RunConfig& config);
EnumerationLimits effective_limits(const RunConfig& config);

struct TrainOutput {
  Model model;
  std::map<ConstraintType, std::vector<IterationMetrics>> metrics;
  std::map<ConstraintType, std::string> abort_reason;
};

using ModelCheckpointFn = std::function<void(ConstraintType, int, const TaskFunctionParams&)>;

TrainOutput train_model(const RunConfig& config, std::span<const DemoVideo> videos,
                        const ModelCheckpointFn& checkpoint = {});

struct ServoTrial {
  int category_id = 0;
  int trial = 0;
  ServoTrace trace;
  bool success = false;
};

/// Random initial poses per trial; errors are recorded as failed trials.
std::vector<ServoTrial> run_servo_trials(const RunConfig& config, const CategoryScene& scene,
                                         InstanceSelector& selector, int trials);

std::unique_ptr<InstanceSelector> make_random_selector(const RunConfig& config, bool per_frame);

struct CorrespondenceAnalysis {
  ConstraintType ctype = ConstraintType::kPointToPoint;
  std::vector<std::string> rows;  // video ids, one per category
  Eigen::MatrixXd model, random;
  double model_dispersion = 0.0, random_dispersion = 0.0;
};

/// Correspondence matrices of the trained selector and the random baseline
/// over the first video of each category, both embedded with the model.
CorrespondenceAnalysis correspondence_analysis(const RunConfig& config, const Model& model,
                                               std::span<const DemoVideo> videos, ConstraintType ctype,
                                               int steps = 16);

}  // namespace covgs
