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

#include <doctest.h>

#include <random>

#include "covgs/errors.hpp"
#include "covgs/eval.hpp"
#include "covgs/pipeline.hpp"

using namespace covgs;

namespace {

std::vector<ErrorVector> scalar_series(std::initializer_list<double> v) {
  std::vector<ErrorVector> out;
  for (double x : v) out.push_back(ErrorVector::Constant(1, x));
  return out;
}

const DemoVideo& demo() {
  static const DemoVideo v = [] {
    const auto scenes = build_scenes(RunConfig{});
    return generate_demo(scenes[0].scene, scenes[0].goal, 40, 8);
  }();
  return v;
}

// Picks any candidate that is not the ground truth.
class WrongSelector : public InstanceSelector {
 public:
  explicit WrongSelector(GroundTruth t) : truth_(std::move(t)) {}
  Selected select(const Frame& frame, ConstraintType ctype) override {
    const auto gt = ground_truth_instance(frame, truth_, ctype);
    for (auto& inst : enumerate_instances(frame.features, ctype)) {
      if (gt && inst.canonical_key == gt->canonical_key) continue;
      try {
        auto e = error_vector(inst);
        return {inst, e};
      } catch (const Error&) {
      }
    }
    throw Error(ErrorKind::kNoValidCandidates, "none");
  }

 private:
  GroundTruth truth_;
};

ServoTrace converged_with(Eigen::VectorXd e) {
  ServoTrace t;
  t.status = ServoStatus::kConverged;
  t.final_task_error = std::move(e);
  return t;
}

}  // namespace

TEST_SUITE("eval") {

TEST_CASE("consistency examples") {
  CHECK(consistency(scalar_series({5, 4, 3, 2, 1})) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(consistency(scalar_series({2, 2, 2, 2})) == 1.0);
  CHECK(consistency(scalar_series({1, -1, 1, -1, 1, -1})) == doctest::Approx(-1.0).epsilon(1e-12));
  try {
    consistency(scalar_series({1, 2}));
    FAIL("expected SeriesTooShort");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kSeriesTooShort);
  }
  std::vector<ErrorVector> two;
  for (int t = 0; t < 6; ++t) two.push_back(Eigen::Vector2d(6 - t, 3.0));
  CHECK(consistency(two) == doctest::Approx(1.0));
}

TEST_CASE("property: consistency range and affine invariance") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 3 + trial % 20;
    std::vector<ErrorVector> s, t;
    const double a = std::exp(g(rng)), b = 10 * g(rng);
    double walk = 0;
    for (int i = 0; i < n; ++i) {
      walk += g(rng);
      const double x = trial % 2 ? walk : g(rng);
      s.push_back(ErrorVector::Constant(1, x));
      t.push_back(ErrorVector::Constant(1, a * x + b));
    }
    const double c = consistency(s);
    CHECK(c >= -1.0);
    CHECK(c <= 1.0);
    CHECK(consistency(t) == doctest::Approx(c).epsilon(1e-9));
  }
}

TEST_CASE("accuracy of oracle and wrong selectors") {
  const DemoVideo& v = demo();
  OracleSelector oracle(*v.ground_truth);
  CHECK(accuracy(oracle, v, ConstraintType::kPointToPoint) == 1.0);
  CHECK(accuracy(oracle, v, ConstraintType::kLineToLine) == 1.0);
  WrongSelector wrong(*v.ground_truth);
  CHECK(accuracy(wrong, v, ConstraintType::kPointToPoint) == 0.0);
  DemoVideo no_truth = v;
  no_truth.ground_truth.reset();
  try {
    accuracy(oracle, no_truth, ConstraintType::kPointToPoint);
    FAIL("expected MissingGroundTruth");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kMissingGroundTruth);
  }
  const auto series = selected_error_series(oracle, v, ConstraintType::kPointToPoint);
  CHECK(series.size() >= v.frames.size() - 5);
  CHECK(consistency(series) > 0.8);
}

TEST_CASE("property: accuracy is invariant to consistent id relabeling") {
  const DemoVideo& v = demo();
  const auto params = TaskFunctionParams::random(Hyperparams{}, 4);
  const std::map<ConstraintType, TaskFunctionParams> m{{ConstraintType::kPointToPoint, params}};
  auto relabel = [](int id) { return 3 * id + 7; };
  DemoVideo r = v;
  for (auto& f : r.frames) {
    for (auto& fp : f.features) fp.id = relabel(fp.id);
  }
  for (auto& [ct, ids] : r.ground_truth->bindings) {
    for (auto& id : ids) id = relabel(id);
  }
  TaskFunctionSelector a(m, {}), b(m, {});
  CHECK(accuracy(a, v, ConstraintType::kPointToPoint) == accuracy(b, r, ConstraintType::kPointToPoint));
}

TEST_CASE("success rate") {
  const Eigen::Vector3d thr(2.0, 2.0, 0.02);
  std::vector<ServoTrace> traces{converged_with(Eigen::Vector3d(1.0, -1.5, 0.01)),
                                 converged_with(Eigen::Vector3d(2.5, 0.0, 0.0)),
                                 converged_with(Eigen::Vector3d(0.1, 0.1, 0.03))};
  ServoTrace aborted;
  aborted.status = ServoStatus::kNoValidCandidates;
  traces.push_back(aborted);
  CHECK(success_rate(traces, thr) == doctest::Approx(0.25));
  ServoTrace fake = converged_with(Eigen::Vector3d(0, 0, 0));
  fake.status = ServoStatus::kMaxIters;
  CHECK_FALSE(trial_succeeded(fake, thr));
  double prev = 0.0;
  for (double s : {0.5, 1.0, 2.0, 4.0, 8.0}) {
    const double r = success_rate(traces, s * thr);
    CHECK(r >= prev);
    prev = r;
  }
  CHECK(prev == doctest::Approx(0.75));
  const std::vector<ServoTrace> all_ok{converged_with(Eigen::Vector3d::Zero()), converged_with(Eigen::Vector3d::Zero())};
  CHECK(success_rate(all_ok, thr) == 1.0);
}

TEST_CASE("correspondence matrix and dispersion") {
  Eigen::MatrixXd same(3, 4);
  same.rowwise() = Eigen::RowVector4d(1, 2, 3, 4);
  CHECK(column_dispersion(same) == 0.0);
  Eigen::MatrixXd two(2, 2);
  two << 0, 1, 2, 5;
  CHECK(column_dispersion(two) == doctest::Approx(1.5));

  const auto params = TaskFunctionParams::random(Hyperparams{}, 6);
  const std::map<ConstraintType, TaskFunctionParams> m{{ConstraintType::kPointToPoint, params}};
  TaskFunctionSelector sel(m, {});
  const std::vector<DemoVideo> twins{demo(), demo()};
  const auto cm = correspondence_matrix(params, sel, twins, ConstraintType::kPointToPoint);
  CHECK(cm.rows() == 2);
  CHECK(cm.cols() == 16);
  CHECK(cm.allFinite());
  CHECK(cm.row(0) == cm.row(1));
  DemoVideo shorty = demo();
  shorty.frames.resize(10);
  const std::vector<DemoVideo> short_set{shorty};
  CHECK_THROWS_AS(correspondence_matrix(params, sel, short_set, ConstraintType::kPointToPoint), Error);
}

TEST_CASE("selection report") {
  const DemoVideo& v = demo();
  OracleSelector oracle(*v.ground_truth);
  const std::vector<DemoVideo> vids{v};
  const std::vector<ConstraintType> ct{ConstraintType::kPointToPoint, ConstraintType::kLineToLine};
  const std::vector<int> trained{0};
  const auto rep = evaluate_selection(oracle, vids, ct, trained);
  CHECK(rep.videos.size() == 2);
  REQUIRE(rep.categories.size() == 2);
  for (const auto& c : rep.categories) {
    CHECK_FALSE(c.extrapolation);
    CHECK(*c.acc_mean == 1.0);
    CHECK(c.conacc_mean <= 1.0);
  }
  const std::vector<double> xs{1, 2, 3, 4};
  const auto [mu, sd] = mean_std(xs);
  CHECK(mu == 2.5);
  CHECK(sd == doctest::Approx(std::sqrt(1.25)));
}

}  // TEST_SUITE
