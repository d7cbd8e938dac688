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

#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "covgs/graphspec.hpp"

namespace covgs {

/// Feature ids of the task-relevant instance per constraint type, in node order.
struct GroundTruth {
  std::map<ConstraintType, std::vector<int>> bindings;
};

struct DemoVideo {
  std::string video_id;
  int category_id = 0;
  std::vector<Frame> frames;
  std::optional<GroundTruth> ground_truth;
};

}  // namespace covgs
