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

// Selection accuracy, error-series consistency, servo success rate and the
// cross-category correspondence matrix.

#pragma once

#include <Eigen/Core>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "covgs/demo.hpp"
#include "covgs/selector.hpp"
#include "covgs/servo.hpp"

namespace covgs {

inline constexpr int kDefaultBridgeFrames = 3;

/// Fraction of frames whose streamed top-1 instance matches the ground-truth
/// key. Frames where the ground-truth features are not all visible are
/// skipped; abstentions count as misses. Throws MissingGroundTruth.
double accuracy(InstanceSelector& selector, const DemoVideo& video, ConstraintType ctype,
                int bridge_frames = kDefaultBridgeFrames);

/// Mean lag-1 Pearson autocorrelation over error components; a component
/// with variance below 1e-12 counts as 1. Throws SeriesTooShort.
double consistency(std::span<const ErrorVector> series);

/// Errors of the streamed top-1 instance over a video; frames without a
/// selection are skipped.
std::vector<ErrorVector> selected_error_series(InstanceSelector& selector, const DemoVideo& video,
                                               ConstraintType ctype, int bridge_frames = kDefaultBridgeFrames);

/// Final task error of a trace, falling back to the last measured error.
std::optional<Eigen::VectorXd> final_task_error(const ServoTrace& trace);

bool trial_succeeded(const ServoTrace& trace, const Eigen::VectorXd& thresholds);

double success_rate(std::span<const ServoTrace> traces, const Eigen::VectorXd& thresholds);

/// rows = videos (one per category), cols = `steps` evenly spaced frames;
/// entry = first component of the top-1 instance's embedding.
Eigen::MatrixXd correspondence_matrix(const TaskFunctionParams& params, InstanceSelector& selector,
                                      std::span<const DemoVideo> videos, ConstraintType ctype, int steps = 16);

/// Mean over columns of the population standard deviation across rows.
double column_dispersion(const Eigen::MatrixXd& m);

struct VideoEval {
  std::string video_id;
  int category_id = 0;
  ConstraintType ctype = ConstraintType::kPointToPoint;
  std::optional<double> acc;
  double conacc = 0.0;
};

struct CategorySummary {
  int category_id = 0;
  ConstraintType ctype = ConstraintType::kPointToPoint;
  bool extrapolation = false;
  int videos = 0;
  std::optional<double> acc_mean, acc_std;
  double conacc_mean = 0.0, conacc_std = 0.0;
};

struct SelectionEvalReport {
  std::vector<VideoEval> videos;
  std::vector<CategorySummary> categories;
};

SelectionEvalReport evaluate_selection(InstanceSelector& selector, std::span<const DemoVideo> videos,
                                       std::span<const ConstraintType> ctypes,
                                       std::span<const int> trained_categories,
                                       int bridge_frames = kDefaultBridgeFrames);

/// Mean and population standard deviation.
std::pair<double, double> mean_std(std::span<const double> v);

}  // namespace covgs
