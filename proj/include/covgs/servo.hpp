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

// Uncalibrated visual servoing: exploratory Jacobian estimate, Broyden
// secant updates and a damped pseudo-inverse control law.

#pragma once

#include <Eigen/Core>
#include <optional>
#include <string>
#include <vector>

#include "covgs/selector.hpp"
#include "covgs/sim.hpp"

namespace covgs {

struct ServoConfig {
  double gain = 0.2;          // lambda
  double broyden_step = 0.3;  // alpha_b
  std::vector<double> deltas;  // exploratory step per joint; empty uses the plant's
  int max_iters = 300;
  double pp_threshold = 2.0;   // px, per component
  double ll_threshold = 0.02;
  double pl_threshold = 2.0;   // px
  double damping = 1e-6;
  double ll_scale = 100.0;     // weight of LL components in the stacked error
  std::vector<ConstraintType> ctypes{ConstraintType::kPointToPoint, ConstraintType::kLineToLine};
  double divergence_factor = 10.0;
  int divergence_window = 20;
  // Consecutive below-threshold measurements needed to declare convergence.
  int settle_steps = 3;
  // Secant updates are skipped for joint steps shorter than this, measured
  // in units of the exploratory deltas.
  double broyden_min_step = 1.0;
  // Solve for the step in units of the exploratory deltas, so joints of
  // different physical units weigh alike in the minimum-norm solution.
  bool normalize_joints = true;
  // Control steps longer than this (in delta units) are scaled down; 0
  // disables the limit.
  double max_step = 0.0;
  // Consecutive unavailable measurements tolerated before giving up.
  int missing_limit = 10;
  // Frames the visual probe waits for a selected instance's missing
  // features before selecting afresh.
  int bridge_frames = 3;

  /// Throws ConfigError.
  void validate() const;
};

/// Something whose error can be measured and moved in joint space.
class ErrorProbe {
 public:
  struct Measurement {
    Eigen::VectorXd error;
    // False when the measured quantity is not the one measured last time
    // (for example the selected instance changed).
    bool continuous = true;
    // False when nothing could be measured (features missing from view);
    // `error` is then empty.
    bool available = true;
  };

  virtual ~ErrorProbe() = default;
  virtual Measurement measure() = 0;
  virtual void move(const Eigen::VectorXd& dq) = 0;
  virtual int dof() const = 0;
  virtual Eigen::VectorXd joints() const = 0;
  /// Keep measuring the same quantity while probing.
  virtual void hold(bool) {}
};

struct JacobianProbe {
  Eigen::MatrixXd J;
  std::vector<int> singular_columns;  // columns with norm below 1e-12
};

/// Column i = (e(q0 + d_i e_i) - e(q0)) / d_i; returns the probe to q0. When
/// the forward measurement is unavailable the backward difference at -d_i is
/// used; a column with neither is left zero. Throws NoValidCandidates when
/// e(q0) is unavailable.
JacobianProbe estimate_initial_jacobian(ErrorProbe& probe, const Eigen::VectorXd& deltas);

/// J + alpha_b (de - J dq) dq^T / (dq^T dq). Throws DegenerateStep.
Eigen::MatrixXd broyden_update(const Eigen::MatrixXd& J, const Eigen::VectorXd& dq, const Eigen::VectorXd& de,
                               double alpha_b);

/// -lambda * J^T (J J^T + eps I)^-1 e, or the (J^T J + eps I)^-1 J^T form when d > n.
Eigen::VectorXd control_step(const Eigen::MatrixXd& J, const Eigen::VectorXd& e, double lambda, double eps);

double condition_number(const Eigen::MatrixXd& J);

enum class ServoStatus { kConverged, kMaxIters, kDiverged, kNoValidCandidates, kPlantFault, kNumeric };

const char* to_string(ServoStatus s);

struct ServoRecord {
  int iter = 0;
  Eigen::VectorXd q;
  Eigen::VectorXd e;  // unscaled
  double err_norm = 0.0;
  double cond_j = 0.0;
  Eigen::VectorXd dq;
};

struct ServoTrace {
  std::vector<ServoRecord> records;
  ServoStatus status = ServoStatus::kMaxIters;
  std::string message;
  int control_steps = 0;
  Eigen::VectorXd final_error;  // last measured, unscaled
  // Ground-truth task error at the end, when the plant knows it.
  std::optional<Eigen::VectorXd> final_task_error;
  std::vector<int> singular_columns;
};

/// Generic loop on an error probe. `scale` weights components for control;
/// convergence compares unscaled components with `thresholds`. While
/// measurements are unavailable the error is predicted from the Jacobian.
ServoTrace run_uvs(ErrorProbe& probe, const ServoConfig& config, const Eigen::VectorXd& thresholds,
                   const Eigen::VectorXd& scale, const Eigen::VectorXd& deltas);

/// Observes the plant, selects one instance per constraint type and stacks
/// their errors.
class VisualErrorProbe : public ErrorProbe {
 public:
  VisualErrorProbe(ServoPlant& plant, InstanceSelector& selector, std::vector<ConstraintType> ctypes,
                   int bridge_frames = 3);

  Measurement measure() override;
  void move(const Eigen::VectorXd& dq) override { plant_.act(dq); }
  int dof() const override { return plant_.dof(); }
  Eigen::VectorXd joints() const override { return plant_.joints(); }
  void hold(bool on) override { hold_ = on; }

 private:
  ServoPlant& plant_;
  InstanceSelector& selector_;
  std::vector<ConstraintType> ctypes_;
  int bridge_frames_;
  std::vector<CanonicalKey> last_keys_;
  int missing_ = 0;
  bool hold_ = false;
};

/// Component thresholds and control weights for stacked constraint types.
Eigen::VectorXd stacked_thresholds(const ServoConfig& config, const std::vector<ConstraintType>& ctypes);
Eigen::VectorXd stacked_scale(const ServoConfig& config, const std::vector<ConstraintType>& ctypes);

/// Full visual loop on a simulated plant; the final ground-truth task error
/// is recorded from the plant oracle.
ServoTrace servo_loop(ServoPlant& plant, InstanceSelector& selector, const ServoConfig& config);

}  // namespace covgs
