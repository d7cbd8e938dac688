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

#include "covgs/eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "covgs/errors.hpp"

namespace covgs {

double accuracy(InstanceSelector& selector, const DemoVideo& video, ConstraintType ctype, int bridge_frames) {
  if (!video.ground_truth || !video.ground_truth->bindings.count(ctype)) {
    throw Error(ErrorKind::kMissingGroundTruth, "video '" + video.video_id + "' has no " +
                                                    std::string(short_name(ctype)) + " ground truth");
  }
  SelectionStream stream(selector, bridge_frames);
  int total = 0, correct = 0;
  for (const auto& frame : video.frames) {
    auto truth = ground_truth_instance(frame, *video.ground_truth, ctype);
    auto s = stream.next(frame, ctype);
    if (!truth) continue;
    ++total;
    if (s && s->instance.canonical_key == truth->canonical_key) ++correct;
  }
  if (total == 0) {
    throw Error(ErrorKind::kMissingGroundTruth, "ground-truth features never visible in '" + video.video_id + "'");
  }
  return static_cast<double>(correct) / total;
}

double consistency(std::span<const ErrorVector> series) {
  if (series.size() < 3) throw Error(ErrorKind::kSeriesTooShort, "consistency needs at least 3 samples");
  const auto dim = series.front().size();
  if (dim == 0) throw Error(ErrorKind::kDimensionMismatch, "empty error vectors");
  const auto n = static_cast<double>(series.size());
  double total = 0.0;
  for (Eigen::Index c = 0; c < dim; ++c) {
    double mean = 0.0;
    for (const auto& e : series) {
      if (e.size() != dim) throw Error(ErrorKind::kDimensionMismatch, "error dimension varies along the series");
      mean += e[c];
    }
    mean /= n;
    double var = 0.0;
    for (const auto& e : series) var += (e[c] - mean) * (e[c] - mean);
    if (var / n < 1e-12) {
      total += 1.0;
      continue;
    }
    double mx = 0.0, my = 0.0;
    const std::size_t m = series.size() - 1;
    for (std::size_t t = 0; t < m; ++t) {
      mx += series[t][c];
      my += series[t + 1][c];
    }
    mx /= m;
    my /= m;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t t = 0; t < m; ++t) {
      const double dx = series[t][c] - mx, dy = series[t + 1][c] - my;
      sxy += dx * dy;
      sxx += dx * dx;
      syy += dy * dy;
    }
    if (sxx < 1e-24 || syy < 1e-24) continue;  // one half constant: no linear relation
    total += std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  }
  return total / static_cast<double>(dim);
}

std::vector<ErrorVector> selected_error_series(InstanceSelector& selector, const DemoVideo& video,
                                               ConstraintType ctype, int bridge_frames) {
  SelectionStream stream(selector, bridge_frames);
  std::vector<ErrorVector> out;
  for (const auto& frame : video.frames) {
    if (auto s = stream.next(frame, ctype)) out.push_back(std::move(s->error));
  }
  return out;
}

std::optional<Eigen::VectorXd> final_task_error(const ServoTrace& trace) {
  if (trace.final_task_error) return trace.final_task_error;
  if (trace.status == ServoStatus::kConverged && trace.final_error.size() > 0) return trace.final_error;
  return std::nullopt;
}

bool trial_succeeded(const ServoTrace& trace, const Eigen::VectorXd& thresholds) {
  if (trace.status != ServoStatus::kConverged) return false;
  auto e = final_task_error(trace);
  if (!e || e->size() != thresholds.size()) return false;
  for (Eigen::Index i = 0; i < e->size(); ++i) {
    if (!(std::abs((*e)[i]) < thresholds[i])) return false;
  }
  return true;
}

double success_rate(std::span<const ServoTrace> traces, const Eigen::VectorXd& thresholds) {
  if (traces.empty()) return 0.0;
  int ok = 0;
  for (const auto& t : traces) ok += trial_succeeded(t, thresholds) ? 1 : 0;
  return static_cast<double>(ok) / static_cast<double>(traces.size());
}

Eigen::MatrixXd correspondence_matrix(const TaskFunctionParams& params, InstanceSelector& selector,
                                      std::span<const DemoVideo> videos, ConstraintType ctype, int steps) {
  if (steps < 1) throw Error(ErrorKind::kConfig, "steps must be positive");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(videos.size()), steps);
  for (std::size_t r = 0; r < videos.size(); ++r) {
    const auto& frames = videos[r].frames;
    if (frames.size() < static_cast<std::size_t>(steps)) {
      throw Error(ErrorKind::kSeriesTooShort, "video '" + videos[r].video_id + "' has fewer frames than steps");
    }
    for (int c = 0; c < steps; ++c) {
      const std::size_t idx =
          steps == 1 ? 0 : static_cast<std::size_t>(std::llround(static_cast<double>(c) * (frames.size() - 1) / (steps - 1)));
      const Selected s = selector.select(frames[idx], ctype);
      m(static_cast<Eigen::Index>(r), c) = encode(params, s.instance)[0];
    }
  }
  return m;
}

double column_dispersion(const Eigen::MatrixXd& m) {
  if (m.cols() == 0 || m.rows() == 0) return 0.0;
  double total = 0.0;
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    const double mean = m.col(c).mean();
    total += std::sqrt((m.col(c).array() - mean).square().mean());
  }
  return total / static_cast<double>(m.cols());
}

std::pair<double, double> mean_std(std::span<const double> v) {
  if (v.empty()) return {0.0, 0.0};
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  return {mean, std::sqrt(var / static_cast<double>(v.size()))};
}

SelectionEvalReport evaluate_selection(InstanceSelector& selector, std::span<const DemoVideo> videos,
                                       std::span<const ConstraintType> ctypes,
                                       std::span<const int> trained_categories, int bridge_frames) {
  SelectionEvalReport report;
  for (auto ct : ctypes) {
    std::map<int, std::vector<const VideoEval*>> by_cat;
    const std::size_t first = report.videos.size();
    for (const auto& video : videos) {
      VideoEval ve;
      ve.video_id = video.video_id;
      ve.category_id = video.category_id;
      ve.ctype = ct;
      if (video.ground_truth && video.ground_truth->bindings.count(ct)) ve.acc = accuracy(selector, video, ct, bridge_frames);
      const auto series = selected_error_series(selector, video, ct, bridge_frames);
      ve.conacc = consistency(series);
      report.videos.push_back(ve);
    }
    for (std::size_t i = first; i < report.videos.size(); ++i) {
      by_cat[report.videos[i].category_id].push_back(&report.videos[i]);
    }
    for (const auto& [cat, list] : by_cat) {
      CategorySummary s;
      s.category_id = cat;
      s.ctype = ct;
      s.extrapolation =
          std::find(trained_categories.begin(), trained_categories.end(), cat) == trained_categories.end();
      s.videos = static_cast<int>(list.size());
      std::vector<double> acc, con;
      for (const auto* v : list) {
        if (v->acc) acc.push_back(*v->acc);
        con.push_back(v->conacc);
      }
      if (!acc.empty()) std::tie(s.acc_mean, s.acc_std) = mean_std(acc);
      std::tie(s.conacc_mean, s.conacc_std) = mean_std(con);
      report.categories.push_back(s);
    }
  }
  return report;
}

}  // namespace covgs
