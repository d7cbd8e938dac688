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

// Persistence: demo JSONL, model JSON and CSV reports. Files are written to a
// temporary sibling and renamed into place.

#pragma once

#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "covgs/demo.hpp"
#include "covgs/eval.hpp"
#include "covgs/neural.hpp"
#include "covgs/servo.hpp"
#include "covgs/training.hpp"

namespace covgs {

inline constexpr int kDemoFormatVersion = 1;
inline constexpr int kModelFormatVersion = 1;

/// Header line, then one line per frame. The ground truth rides on the first
/// frame of each video.
std::string demo_to_jsonl(std::span<const DemoVideo> videos);
std::vector<DemoVideo> demo_from_jsonl(const std::string& text, const std::string& source = "<memory>");

void write_demo_file(const std::string& path, std::span<const DemoVideo> videos);
std::vector<DemoVideo> read_demo_file(const std::string& path);

/// Reads every *.jsonl file under `path` (or `path` itself) in name order.
std::vector<DemoVideo> read_demos(const std::string& path);

struct Model {
  std::map<ConstraintType, TaskFunctionParams> task_functions;
  std::vector<int> trained_categories;
};

std::string model_to_json(const Model& model);
Model model_from_json(const std::string& text);
void write_model(const std::string& path, const Model& model);
Model read_model(const std::string& path);

std::string metrics_csv(std::span<const IterationMetrics> metrics);
std::string trace_csv(const ServoTrace& trace);
std::string matrix_csv(const Eigen::MatrixXd& m, const std::vector<std::string>& row_labels);
std::string selection_report_csv(const SelectionEvalReport& report);
std::string selection_report_table(const SelectionEvalReport& report);

/// Writes via temp file + rename. Throws Io.
void write_file_atomic(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

/// Shortest decimal form that parses back to the same double.
std::string format_double(double v);

}  // namespace covgs
