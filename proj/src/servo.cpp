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

#include "covgs/servo.hpp"

#include <Eigen/Cholesky>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <limits>

#include "covgs/errors.hpp"

namespace covgs {

using Eigen::MatrixXd;
using Eigen::VectorXd;

void ServoConfig::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) throw Error(ErrorKind::kConfig, std::string(name) + " must be positive");
  };
  positive(gain, "servo.gain");
  positive(damping, "servo.damping");
  positive(ll_scale, "servo.ll_scale");
  positive(pp_threshold, "servo.pp_threshold");
  positive(ll_threshold, "servo.ll_threshold");
  positive(pl_threshold, "servo.pl_threshold");
  positive(divergence_factor, "servo.divergence_factor");
  if (!(broyden_step > 0.0 && broyden_step <= 1.0)) {
    throw Error(ErrorKind::kConfig, "servo.broyden_step must lie in (0, 1]");
  }
  if (max_iters <= 0) throw Error(ErrorKind::kConfig, "servo.max_iters must be positive");
  if (divergence_window <= 0) throw Error(ErrorKind::kConfig, "servo.divergence_window must be positive");
  if (settle_steps < 1) throw Error(ErrorKind::kConfig, "servo.settle_steps must be at least 1");
  if (!(max_step >= 0.0)) throw Error(ErrorKind::kConfig, "servo.max_step must be non-negative");
  if (!(broyden_min_step >= 0.0)) throw Error(ErrorKind::kConfig, "servo.broyden_min_step must be non-negative");
  if (missing_limit < 0) throw Error(ErrorKind::kConfig, "servo.missing_limit must be non-negative");
  if (bridge_frames < 0) throw Error(ErrorKind::kConfig, "bridge_frames must be non-negative");
  for (double d : deltas) {
    if (d == 0.0 || !std::isfinite(d)) throw Error(ErrorKind::kConfig, "servo.deltas must be nonzero");
  }
  if (ctypes.empty()) throw Error(ErrorKind::kConfig, "servo.ctypes must not be empty");
}

const char* to_string(ServoStatus s) {
  switch (s) {
    case ServoStatus::kConverged: return "converged";
    case ServoStatus::kMaxIters: return "max_iters";
    case ServoStatus::kDiverged: return "diverged";
    case ServoStatus::kNoValidCandidates: return "no_valid_candidates";
    case ServoStatus::kPlantFault: return "plant_fault";
    case ServoStatus::kNumeric: return "numeric";
  }
  return "unknown";
}

JacobianProbe estimate_initial_jacobian(ErrorProbe& probe, const VectorXd& deltas) {
  const int n = probe.dof();
  if (deltas.size() != n) throw Error(ErrorKind::kDimensionMismatch, "one exploratory delta per joint required");
  probe.hold(true);
  struct Release {
    ErrorProbe& p;
    ~Release() { p.hold(false); }
  } release{probe};
  const auto m0 = probe.measure();
  if (!m0.available) throw Error(ErrorKind::kNoValidCandidates, "error unavailable at the probe origin");
  const VectorXd& e0 = m0.error;
  JacobianProbe out{MatrixXd::Zero(e0.size(), n), {}};
  auto checked = [&](const ErrorProbe::Measurement& m) {
    if (m.available && m.error.size() != e0.size()) {
      throw Error(ErrorKind::kDimensionMismatch, "error dimension changed while probing");
    }
    return m.available;
  };
  for (int i = 0; i < n; ++i) {
    if (deltas[i] == 0.0) throw Error(ErrorKind::kConfig, "exploratory delta must be nonzero");
    VectorXd step = VectorXd::Zero(n);
    step[i] = deltas[i];
    probe.move(step);
    auto mi = probe.measure();
    if (checked(mi)) {
      out.J.col(i) = (mi.error - e0) / deltas[i];
      probe.move(-step);
    } else {
      probe.move(-2.0 * step);
      mi = probe.measure();
      if (checked(mi)) out.J.col(i) = (e0 - mi.error) / deltas[i];
      probe.move(step);
    }
    if (out.J.col(i).norm() < 1e-12) out.singular_columns.push_back(i);
  }
  return out;
}

MatrixXd broyden_update(const MatrixXd& J, const VectorXd& dq, const VectorXd& de, double alpha_b) {
  const double nn = dq.squaredNorm();
  if (std::sqrt(nn) <= 1e-12) throw Error(ErrorKind::kDegenerateStep, "joint step too small for a secant update");
  if (J.rows() != de.size() || J.cols() != dq.size()) {
    throw Error(ErrorKind::kDimensionMismatch, "Broyden update shapes disagree");
  }
  return J + alpha_b * (de - J * dq) * dq.transpose() / nn;
}

VectorXd control_step(const MatrixXd& J, const VectorXd& e, double lambda, double eps) {
  if (J.rows() != e.size()) throw Error(ErrorKind::kDimensionMismatch, "Jacobian rows differ from error size");
  if (J.rows() <= J.cols()) {
    const MatrixXd A = J * J.transpose() + eps * MatrixXd::Identity(J.rows(), J.rows());
    return -lambda * J.transpose() * A.ldlt().solve(e);
  }
  const MatrixXd A = J.transpose() * J + eps * MatrixXd::Identity(J.cols(), J.cols());
  return -lambda * A.ldlt().solve(J.transpose() * e);
}

double condition_number(const MatrixXd& J) {
  if (J.size() == 0) return 0.0;
  Eigen::JacobiSVD<MatrixXd> svd(J);
  const auto& s = svd.singularValues();
  const double lo = s[s.size() - 1];
  return lo > 0.0 ? s[0] / lo : std::numeric_limits<double>::infinity();
}

namespace {

bool below(const VectorXd& e, const VectorXd& thresholds) {
  for (int i = 0; i < e.size(); ++i) {
    if (!(std::abs(e[i]) < thresholds[i])) return false;
  }
  return true;
}

}  // namespace

ServoTrace run_uvs(ErrorProbe& probe, const ServoConfig& config, const VectorXd& thresholds, const VectorXd& scale,
                   const VectorXd& deltas) {
  ServoTrace trace;
  auto fail = [&](ServoStatus s, const std::string& msg) {
    trace.status = s;
    trace.message = msg;
    return trace;
  };
  try {
    const int n = probe.dof();
    auto m = probe.measure();
    for (int k = 0; !m.available; ++k) {
      if (k >= config.missing_limit) {
        return fail(ServoStatus::kNoValidCandidates, "error unavailable at the initial pose");
      }
      VectorXd nudge = VectorXd::Zero(n);
      nudge[k % n] = 0.25 * deltas[k % n];
      probe.move(nudge);
      m = probe.measure();
    }
    if (m.error.size() != thresholds.size() || m.error.size() != scale.size()) {
      throw Error(ErrorKind::kDimensionMismatch, "error dimension differs from thresholds");
    }
    trace.final_error = m.error;
    // Already at the goal: confirm without moving.
    if (below(m.error, thresholds)) {
      bool settled = true;
      for (int k = 1; k < config.settle_steps && settled; ++k) {
        const auto again = probe.measure();
        settled = again.available && below(again.error, thresholds);
        if (again.available) m = again;
      }
      if (settled) {
        trace.final_error = m.error;
        trace.records.push_back({0, probe.joints(), m.error, m.error.norm(), 0.0, VectorXd::Zero(probe.dof())});
        trace.status = ServoStatus::kConverged;
        return trace;
      }
    }
    JacobianProbe jp = estimate_initial_jacobian(probe, deltas);
    trace.singular_columns = jp.singular_columns;
    MatrixXd J = scale.asDiagonal() * jp.J;
    const double initial_norm = scale.cwiseProduct(m.error).norm();
    int over = 0, missing = 0, settled = 0;
    VectorXd prev_es, prev_q;
    for (int it = 0; it < config.max_iters; ++it) {
      if (it > 0) m = probe.measure();
      const VectorXd q = probe.joints();
      VectorXd es;
      if (m.available) {
        missing = 0;
        es = scale.cwiseProduct(m.error);
        trace.final_error = m.error;
        if (!es.allFinite()) return fail(ServoStatus::kNumeric, "non-finite error");
        if (it > 0 && m.continuous &&
            (q - prev_q).cwiseQuotient(deltas).norm() >= config.broyden_min_step) {
          try {
            J = broyden_update(J, q - prev_q, es - prev_es, config.broyden_step);
          } catch (const Error& e) {
            if (e.kind() != ErrorKind::kDegenerateStep) throw;
          }
        }
      } else {
        if (++missing > config.missing_limit) {
          return fail(ServoStatus::kNoValidCandidates,
                      "error unavailable for " + std::to_string(missing) + " consecutive steps");
        }
        es = prev_es + J * (q - prev_q);
      }
      const VectorXd e = es.cwiseQuotient(scale);
      ServoRecord rec{it, q, e, e.norm(), condition_number(J), VectorXd::Zero(probe.dof())};
      if (m.available) {
        settled = below(m.error, thresholds) ? settled + 1 : 0;
        if (settled >= config.settle_steps) {
          trace.records.push_back(std::move(rec));
          trace.status = ServoStatus::kConverged;
          return trace;
        }
        over = es.norm() > config.divergence_factor * initial_norm ? over + 1 : 0;
        if (over >= config.divergence_window) {
          trace.records.push_back(std::move(rec));
          throw Error(ErrorKind::kDivergenceDetected, "error above " + std::to_string(config.divergence_factor) +
                                                          "x its initial norm for " +
                                                          std::to_string(config.divergence_window) + " steps");
        }
        prev_es = es;
        prev_q = q;
      }
      rec.dq = config.normalize_joints
                   ? VectorXd(deltas.cwiseProduct(
                         control_step(J * deltas.asDiagonal(), es, config.gain, config.damping)))
                   : control_step(J, es, config.gain, config.damping);
      if (config.max_step > 0.0) {
        const double len = rec.dq.cwiseQuotient(deltas).norm();
        if (len > config.max_step) rec.dq *= config.max_step / len;
      }
      trace.records.push_back(rec);
      probe.move(rec.dq);
      ++trace.control_steps;
    }
    trace.status = ServoStatus::kMaxIters;
  } catch (const Error& e) {
    switch (e.kind()) {
      case ErrorKind::kNoValidCandidates: return fail(ServoStatus::kNoValidCandidates, e.what());
      case ErrorKind::kDivergenceDetected: return fail(ServoStatus::kDiverged, e.what());
      case ErrorKind::kPlantFault:
      case ErrorKind::kBehindCamera: return fail(ServoStatus::kPlantFault, e.what());
      default: throw;
    }
  }
  return trace;
}

VisualErrorProbe::VisualErrorProbe(ServoPlant& plant, InstanceSelector& selector, std::vector<ConstraintType> ctypes,
                                   int bridge_frames)
    : plant_(plant), selector_(selector), ctypes_(std::move(ctypes)), bridge_frames_(bridge_frames) {}

namespace {

std::optional<GraphInstance> bind_key(const Frame& frame, const CanonicalKey& key, ConstraintType ct) {
  std::vector<FeaturePoint> bound;
  for (int i = 0; i < spec_for(ct).node_count; ++i) {
    const int id = key.ids[i];
    auto f = std::find_if(frame.features.begin(), frame.features.end(),
                          [id](const FeaturePoint& fp) { return fp.id == id; });
    if (f == frame.features.end()) return std::nullopt;
    bound.push_back(*f);
  }
  return make_instance(ct, std::move(bound));
}

}  // namespace

ErrorProbe::Measurement VisualErrorProbe::measure() {
  const Frame frame = plant_.observe();
  const bool have_last = last_keys_.size() == ctypes_.size();
  // Wait for missing features of the tracked instances before reselecting.
  const bool hold = have_last && (hold_ || missing_ < bridge_frames_);
  std::vector<CanonicalKey> keys;
  std::vector<ErrorVector> parts;
  bool continuous = have_last;
  for (std::size_t c = 0; c < ctypes_.size(); ++c) {
    const ConstraintType ct = ctypes_[c];
    std::optional<GraphInstance> inst;
    ErrorVector e;
    if (have_last) {
      inst = bind_key(frame, last_keys_[c], ct);
      if (inst) {
        try {
          e = error_vector(*inst);
        } catch (const Error& err) {
          if (err.kind() != ErrorKind::kDegenerateLine) throw;
          inst.reset();
        }
      }
      if (!inst && hold) {
        ++missing_;
        return {VectorXd(), false, false};
      }
    }
    if (!hold_ || !inst) {
      try {
        Selected s = selector_.select(frame, ct);
        inst = std::move(s.instance);
        e = std::move(s.error);
      } catch (const Error& err) {
        if (err.kind() != ErrorKind::kNoValidCandidates) throw;
        ++missing_;
        return {VectorXd(), false, false};
      }
    }
    if (!have_last || !(inst->canonical_key == last_keys_[c])) continuous = false;
    keys.push_back(inst->canonical_key);
    parts.push_back(std::move(e));
  }
  missing_ = 0;
  last_keys_ = std::move(keys);
  Eigen::Index d = 0;
  for (const auto& p : parts) d += p.size();
  VectorXd out(d);
  d = 0;
  for (const auto& p : parts) {
    out.segment(d, p.size()) = p;
    d += p.size();
  }
  return {out, continuous, true};
}

VectorXd stacked_thresholds(const ServoConfig& config, const std::vector<ConstraintType>& ctypes) {
  std::vector<double> v;
  for (auto ct : ctypes) {
    const double t = ct == ConstraintType::kPointToPoint ? config.pp_threshold
                     : ct == ConstraintType::kLineToLine ? config.ll_threshold
                                                         : config.pl_threshold;
    for (int i = 0; i < error_dimension(ct); ++i) v.push_back(t);
  }
  return Eigen::Map<VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

VectorXd stacked_scale(const ServoConfig& config, const std::vector<ConstraintType>& ctypes) {
  std::vector<double> v;
  for (auto ct : ctypes) {
    for (int i = 0; i < error_dimension(ct); ++i) {
      v.push_back(ct == ConstraintType::kLineToLine ? config.ll_scale : 1.0);
    }
  }
  return Eigen::Map<VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

ServoTrace servo_loop(ServoPlant& plant, InstanceSelector& selector, const ServoConfig& config) {
  config.validate();
  VisualErrorProbe probe(plant, selector, config.ctypes, config.bridge_frames);
  VectorXd deltas = plant.probe_deltas();
  if (!config.deltas.empty()) {
    if (static_cast<int>(config.deltas.size()) != plant.dof()) {
      throw Error(ErrorKind::kConfig, "servo.deltas needs one entry per joint");
    }
    deltas = Eigen::Map<const VectorXd>(config.deltas.data(), plant.dof());
  }
  ServoTrace trace = run_uvs(probe, config, stacked_thresholds(config, config.ctypes),
                             stacked_scale(config, config.ctypes), deltas);
  std::optional<std::map<ConstraintType, ErrorVector>> oracle;
  try {
    oracle = plant.oracle_errors();
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::kBehindCamera) throw;
  }
  if (oracle) {
    std::vector<double> v;
    bool complete = true;
    for (auto ct : config.ctypes) {
      auto it = oracle->find(ct);
      if (it == oracle->end()) {
        complete = false;
        break;
      }
      for (int i = 0; i < it->second.size(); ++i) v.push_back(it->second[i]);
    }
    if (complete) trace.final_task_error = Eigen::Map<VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
  }
  return trace;
}

}  // namespace covgs
