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

// Run configuration: one JSON document with sections seed, sim, enumeration,
// train and servo. Unknown keys are rejected.

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "covgs/servo.hpp"
#include "covgs/sim.hpp"
#include "covgs/training.hpp"

namespace covgs {

struct SimConfig {
  int train_categories = 3;
  int heldout_categories = 1;
  int videos_per_category = 10;
  int heldout_videos = 5;
  int eval_videos_per_category = 5;  // extra held-out videos of trained categories
  int frames_min = 60;
  int frames_max = 180;
  int background_points = 0;
  HammerTemplate tool;
  NoiseModel noise;
  DemoOptions demo;
};

struct RunConfig {
  std::uint64_t seed = 1;
  SimConfig sim;
  EnumerationLimits enumeration{20000, 0, true};
  TrainConfig train;
  std::vector<ConstraintType> train_ctypes{ConstraintType::kPointToPoint, ConstraintType::kLineToLine};
  int bridge_frames = 3;  // selection stream occlusion bridging
  ServoConfig servo;
  int servo_trials = 10;
  std::string robot = "twist";  // twist | arm

  /// Throws ConfigError.
  void validate() const;
};

std::string dump_run_config(const RunConfig& config);

/// Starts from the defaults and overrides the keys present. Throws ConfigError.
RunConfig parse_run_config(std::string_view text);
RunConfig load_run_config(const std::string& path);

}  // namespace covgs
