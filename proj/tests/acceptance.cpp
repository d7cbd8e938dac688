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

// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero when any criterion fails. Details go to stderr and to
// <out>/acceptance_report.txt.

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include <Eigen/Dense>

#include "covgs/errors.hpp"
#include "covgs/eval.hpp"
#include "covgs/io.hpp"
#include "covgs/pipeline.hpp"
#include "covgs/servo.hpp"
#include "covgs/training.hpp"

using namespace covgs;
using Eigen::MatrixXd;
using Eigen::VectorXd;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

std::ostringstream g_report;

void log(const std::string& s) {
  std::cerr << s << "\n";
  g_report << s << "\n";
}

// ---------------------------------------------------------------- criterion 1

struct LineCase {
  PixelPoint p, q;
  double a, b, c;
};

Outcome formula_oracles() {
  Outcome o;
  const auto t0 = Clock::now();
  const double r2 = 1.0 / std::sqrt(2.0);
  // hand-computed: cross product of (u, v, 1) pairs, scaled to a^2 + b^2 = 1,
  // sign fixed by the first nonzero of (a, b)
  const std::vector<LineCase> lines{
      {{0, 0}, {1, 0}, 0, 1, 0},          {{0, 0}, {0, 1}, 1, 0, 0},
      {{1, 2}, {3, 4}, r2, -r2, r2},      {{0, 5}, {10, 5}, 0, 1, -5},
      {{3, -1}, {3, 7}, 1, 0, -3},        {{0, 0}, {3, 4}, 0.8, -0.6, 0},
      {{2, 0}, {0, 2}, r2, r2, -2 * r2},  {{-1, -1}, {1, 1}, r2, -r2, 0},
  };
  int cases = 0;
  double worst = 0.0;
  auto close = [&](double x, double y) {
    worst = std::max(worst, std::abs(x - y));
    return std::abs(x - y) <= 1e-9;
  };
  for (const auto& lc : lines) {
    for (bool swap : {false, true}) {
      const auto l = swap ? line_from_points(lc.q, lc.p) : line_from_points(lc.p, lc.q);
      o.require(close(l.a(), lc.a) && close(l.b(), lc.b) && close(l.c(), lc.c), "line_from_points");
      ++cases;
    }
  }
  struct PP {
    PixelPoint p, q;
    double du, dv;
  };
  for (const PP& c : std::vector<PP>{{{100, 50}, {100, 50}, 0, 0}, {{0, 0}, {3, 4}, 3, 4}, {{2, -1}, {-2, 1}, -4, 2},
                                     {{10.5, 3.25}, {0.5, 4.25}, -10, 1}}) {
    const auto e = pp_error(c.p, c.q);
    o.require(close(e[0], c.du) && close(e[1], c.dv), "pp_error");
    ++cases;
  }
  struct LL {
    PixelPoint p1, q1, p2, q2;
    double mag;
  };
  for (const LL& c : std::vector<LL>{{{0, 0}, {1, 0}, {0, 1}, {1, 1}, 0.0},
                                     {{0, 0}, {1, 0}, {0, 0}, {0, 1}, 1.0},
                                     {{0, 0}, {1, 1}, {0, 0}, {1, 0}, r2},
                                     {{0, 0}, {3, 4}, {5, 5}, {8, 9}, 0.0},
                                     {{0, 0}, {3, 4}, {0, 0}, {-4, 3}, 1.0},
                                     {{0, 0}, {2, 0}, {0, 0}, {1, std::sqrt(3.0)}, std::sqrt(3.0) / 2}}) {
    const auto e = ll_error(line_from_points(c.p1, c.q1), line_from_points(c.p2, c.q2));
    o.require(close(std::abs(e[0]), c.mag), "ll_error");
    ++cases;
  }
  struct PL {
    PixelPoint p, a, b;
    double d;
  };
  for (const PL& c : std::vector<PL>{{{0, 0}, {0, 0}, {1, 0}, 0},
                                     {{0, 5}, {0, 0}, {1, 0}, 5},
                                     {{3, 0}, {0, 0}, {0, 1}, 3},
                                     {{1, 0}, {0, 2}, {2, 0}, -r2},
                                     {{5, 5}, {0, 0}, {3, 4}, 1.0}}) {
    const auto e = pl_error(c.p, line_from_points(c.a, c.b));
    o.require(close(e[0], c.d), "pl_error");
    ++cases;
  }
  for (double phi : {0.0, std::numbers::pi / 6, std::numbers::pi / 4, std::numbers::pi / 2}) {
    const auto l1 = line_from_points({10, 20}, {10 + 50 * std::cos(0.4), 20 + 50 * std::sin(0.4)});
    const auto l2 = line_from_points({-3, 7}, {-3 + 50 * std::cos(0.4 + phi), 7 + 50 * std::sin(0.4 + phi)});
    o.require(close(std::abs(ll_error(l1, l2)[0]), std::sin(phi)), "sin law");
    ++cases;
  }
  try {
    line_from_points({1, 1}, {1, 1});
    o.require(false, "coincident points accepted");
  } catch (const Error& e) {
    o.require(e.kind() == ErrorKind::kDegenerateLine, "coincident points error kind");
  }
  const double secs = seconds_since(t0);
  o.require(cases >= 20, "at least 20 cases");
  o.require(secs < 1.0, "runtime < 1 s");
  o.detail << cases << " cases, max deviation " << worst << ", " << std::setprecision(3) << secs << " s";
  return o;
}

// ---------------------------------------------------------------- criterion 2

std::vector<FeaturePoint> random_features(int m, std::mt19937_64& rng, int dim) {
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> u(0, 640);
  std::vector<FeaturePoint> out;
  for (int i = 0; i < m; ++i) {
    FeaturePoint f;
    f.id = i;
    f.coords = {u(rng), u(rng)};
    f.descriptor = VectorXd::NullaryExpr(dim, [&] { return g(rng); });
    out.push_back(f);
  }
  return out;
}

Outcome permutation_invariance() {
  Outcome o;
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2024);
  double worst = 0.0;
  int draws = 0;
  for (int d = 0; d < 100; ++d) {
    const auto params = TaskFunctionParams::random(Hyperparams{}, rng());
    const auto ct = kAllConstraintTypes[d % 3];
    const auto inst = make_instance(ct, random_features(spec_for(ct).node_count, rng, 16));
    const VectorXd z = encode(params, inst);
    for (const auto& perm : spec_for(ct).automorphisms) {
      worst = std::max(worst, (encode(params, permuted(inst, perm)) - z).cwiseAbs().maxCoeff());
    }
    ++draws;
  }
  o.require(worst <= 1e-6, "encoder invariance");

  long tuples = 0;
  for (auto ct : kAllConstraintTypes) {
    const auto& spec = spec_for(ct);
    const int n = spec.node_count;
    for (int m = n; m <= 6; ++m) {
      std::set<CanonicalKey> keys;
      std::vector<int> ids(n);
      std::function<void(int)> rec = [&](int pos) {
        if (pos == n) {
          const auto k = canonical_key(ct, ids);
          for (const auto& perm : spec.automorphisms) {
            std::vector<int> p(n);
            for (int i = 0; i < n; ++i) p[i] = ids[perm[i]];
            if (!(canonical_key(ct, p) == k)) o.require(false, "canonical key orbit");
          }
          keys.insert(k);
          ++tuples;
          return;
        }
        for (int i = 0; i < m; ++i) {
          if (std::find(ids.begin(), ids.begin() + pos, i) != ids.begin() + pos) continue;
          ids[pos] = i;
          rec(pos + 1);
        }
      };
      rec(0);
      std::vector<FeaturePoint> feats = random_features(m, rng, 4);
      const auto refs = enumerate_refs(feats, ct);
      std::set<CanonicalKey> enumerated;
      for (const auto& r : refs) enumerated.insert(r.key);
      o.require(enumerated == keys && refs.size() == keys.size(), "enumeration equals orbit representatives");
    }
  }
  const double secs = seconds_since(t0);
  o.require(secs < 10.0, "runtime < 10 s");
  o.detail << draws << " encoder draws, max deviation " << worst << ", " << tuples << " id tuples, "
           << std::setprecision(3) << secs << " s";
  return o;
}

// ---------------------------------------------------------------- criterion 3

double group_relative_error(const TaskFunctionParams& params, const TaskFunctionParams& analytic,
                            const std::function<double(const TaskFunctionParams&)>& loss, const GroupShape& g) {
  const double h = 1e-4;
  TaskFunctionParams p = params;
  const Eigen::Index off = static_cast<Eigen::Index>(g.offset), n = g.rows * g.cols;
  VectorXd fd(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double x = p.values()[off + i];
    p.values()[off + i] = x + h;
    const double up = loss(p);
    p.values()[off + i] = x - h;
    const double dn = loss(p);
    p.values()[off + i] = x;
    fd[i] = (up - dn) / (2 * h);
  }
  const VectorXd an = analytic.values().segment(off, n);
  // Both sides at roundoff zero.
  if (an.norm() < 1e-12 && fd.norm() < 1e-12) return 0.0;
  return (an - fd).norm() / std::max(an.norm(), fd.norm());
}

Outcome gradient_correctness() {
  Outcome o;
  const auto t0 = Clock::now();
  std::mt19937_64 rng(77);
  const auto params = TaskFunctionParams::random(Hyperparams{}, 77);
  auto frame = [&](const std::vector<FeaturePoint>& base, double jitter, ConstraintType ct) {
    auto f = base;
    std::normal_distribution<double> g(0, jitter);
    for (auto& x : f) {
      x.coords.u += g(rng);
      x.coords.v += g(rng);
    }
    return enumerate_instances(f, ct);
  };
  double worst_t = 0.0, worst_s = 0.0;
  int groups = 0;
  for (auto ct : {ConstraintType::kPointToPoint, ConstraintType::kLineToLine}) {
    const auto base = random_features(ct == ConstraintType::kPointToPoint ? 3 : 4, rng, 16);
    const auto early = frame(base, 0.0, ct);
    const auto late = frame(base, 20.0, ct);
    const double alpha = ct == ConstraintType::kPointToPoint ? 0.3 : 5.0;
    const auto tg = temporal_order_gradient(params, early, late, alpha, 1.0);
    const auto other = frame(random_features(4, rng, 16), 0.0, ct);
    const std::vector<FramePair> pairs{{early, other}, {late, frame(base, 5.0, ct)}};
    const auto sg = similarity_gradient(params, pairs, 1.0);
    for (const auto& g : params.groups()) {
      const double et = group_relative_error(
          params, tg.grad, [&](const TaskFunctionParams& p) { return temporal_order_loss(p, early, late, alpha, 1.0); },
          g);
      const double es = group_relative_error(
          params, sg.grad, [&](const TaskFunctionParams& p) { return similarity_loss(p, pairs, 1.0); }, g);
      worst_t = std::max(worst_t, et);
      worst_s = std::max(worst_s, es);
      if (et >= 1e-4) o.require(false, "temporal " + std::string(g.name));
      if (es >= 1e-4) o.require(false, "similarity " + std::string(g.name));
      ++groups;
    }
  }
  const double secs = seconds_since(t0);
  o.require(secs < 60.0, "runtime < 1 min");
  o.detail << groups << " group checks per loss, max relative error temporal " << worst_t << " similarity "
           << worst_s << ", " << std::setprecision(3) << secs << " s";
  return o;
}

// ---------------------------------------------------------------- criterion 4

class LinearProbe : public ErrorProbe {
 public:
  LinearProbe(MatrixXd A, VectorXd target, VectorXd q) : A_(std::move(A)), t_(std::move(target)), q_(std::move(q)) {}
  Measurement measure() override { return {A_ * (q_ - t_), true, true}; }
  void move(const VectorXd& dq) override { q_ += dq; }
  int dof() const override { return static_cast<int>(q_.size()); }
  VectorXd joints() const override { return q_; }
  VectorXd error() const { return A_ * (q_ - t_); }

 private:
  MatrixXd A_;
  VectorXd t_, q_;
};

Outcome broyden_controller() {
  Outcome o;
  const auto t0 = Clock::now();
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g;
  auto randm = [&](int r, int c) { return MatrixXd(MatrixXd::NullaryExpr(r, c, [&] { return g(rng); })); };
  auto randv = [&](int n) { return VectorXd(VectorXd::NullaryExpr(n, [&] { return g(rng); })); };
  double secant = 0.0;
  bool exact = true;
  for (int trial = 0; trial < 200; ++trial) {
    const int d = 1 + trial % 4, n = 2 + trial % 6;
    const MatrixXd J = randm(d, n);
    VectorXd dq = randv(n);
    dq.normalize();
    const VectorXd de = randv(d);
    secant = std::max(secant, (broyden_update(J, dq, de, 1.0) * dq - de).norm());
    // axis step, orthogonal vector with a zero in that axis
    const int k = trial % n;
    const VectorXd ek = VectorXd::Unit(n, k);
    VectorXd w = randv(n);
    w[k] = 0.0;
    for (double ab : {1.0, 0.3}) {
      const MatrixXd J1 = broyden_update(J, ek, de, ab);
      exact = exact && (J1 * w == J * w);
    }
  }
  o.require(secant <= 1e-9, "secant condition");
  o.require(exact, "orthogonal directions preserved");

  double one_step = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 2 + trial % 6;
    const MatrixXd A = MatrixXd::Identity(n, n) + 0.3 * randm(n, n);
    LinearProbe p(A, randv(n), 3.0 * randv(n));
    p.move(control_step(A, p.error(), 1.0, 1e-14));
    one_step = std::max(one_step, p.error().norm());
  }
  o.require(one_step <= 1e-6, "one-step convergence");

  int decreasing = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    std::mt19937_64 r(1000 + seed);
    std::normal_distribution<double> gs;
    const int n = 2 + static_cast<int>(seed % 6);
    const MatrixXd A = MatrixXd::Identity(n, n) + 0.3 * MatrixXd(MatrixXd::NullaryExpr(n, n, [&] { return gs(r); }));
    LinearProbe p(A, VectorXd::NullaryExpr(n, [&] { return gs(r); }), 3.0 * VectorXd::NullaryExpr(n, [&] { return gs(r); }));
    ServoConfig c;
    c.gain = 0.2;
    const auto trace = run_uvs(p, c, VectorXd::Constant(n, 1e-4), VectorXd::Ones(n), VectorXd::Constant(n, 0.1));
    bool ok = trace.status == ServoStatus::kConverged && trace.records.size() > 1;
    for (std::size_t k = 1; ok && k < trace.records.size(); ++k) {
      ok = trace.records[k].err_norm < trace.records[k - 1].err_norm;
    }
    decreasing += ok ? 1 : 0;
  }
  o.require(decreasing == 50, "strict decrease on all seeds");
  const double secs = seconds_since(t0);
  o.require(secs < 10.0, "runtime < 10 s");
  o.detail << "secant residual " << secant << ", one-step residual " << one_step << ", strict decrease "
           << decreasing << "/50, " << std::setprecision(3) << secs << " s";
  return o;
}

// ---------------------------------------------------------------- pipeline

struct PipelineRun {
  DemoSet demos;
  std::string demo_text;
  TrainOutput trained;
  std::string model_text, metrics_text;
  SelectionEvalReport report;
  std::string report_text;
  std::map<ConstraintType, CorrespondenceAnalysis> correspondence;
  std::string correspondence_text;
  std::vector<std::vector<ServoTrial>> servo;  // per category
  std::string servo_text;
  double train_eval_seconds = 0.0, servo_seconds = 0.0;
};

std::string metrics_without_wall(const TrainOutput& t) {
  std::string out;
  for (const auto& [ct, ms] : t.metrics) {
    for (const auto& m : ms) {
      out += std::string(short_name(ct)) + "," + std::to_string(m.outer_iter) + "," + format_double(m.temporal_loss) +
             "," + format_double(m.sim_loss) + "," + format_double(m.grad_norm) + "\n";
    }
  }
  return out;
}

std::vector<DemoVideo> eval_videos(const DemoSet& d) {
  std::vector<DemoVideo> v = d.eval;
  v.insert(v.end(), d.heldout.begin(), d.heldout.end());
  return v;
}

PipelineRun run_pipeline(const RunConfig& config, const std::vector<CategoryScene>& scenes) {
  PipelineRun r;
  r.demos = generate_demo_set(config, scenes);
  std::vector<DemoVideo> all = r.demos.train;
  for (const auto& v : eval_videos(r.demos)) all.push_back(v);
  r.demo_text = demo_to_jsonl(all);

  const auto t0 = Clock::now();
  r.trained = train_model(config, r.demos.train);
  r.model_text = model_to_json(r.trained.model);
  r.metrics_text = metrics_without_wall(r.trained);
  TaskFunctionSelector selector(r.trained.model.task_functions, effective_limits(config), config.train.tau);
  const auto videos = eval_videos(r.demos);
  r.report = evaluate_selection(selector, videos, config.train_ctypes, r.trained.model.trained_categories,
                                config.bridge_frames);
  r.train_eval_seconds = seconds_since(t0);
  r.report_text = selection_report_csv(r.report);

  for (auto ct : config.train_ctypes) {
    auto ca = correspondence_analysis(config, r.trained.model, videos, ct);
    r.correspondence_text += matrix_csv(ca.model, ca.rows) + matrix_csv(ca.random, ca.rows);
    r.correspondence.emplace(ct, std::move(ca));
  }

  const auto t1 = Clock::now();
  for (const auto& cs : scenes) {
    r.servo.push_back(run_servo_trials(config, cs, selector, 10));
    for (const auto& t : r.servo.back()) r.servo_text += trace_csv(t.trace);
  }
  r.servo_seconds = seconds_since(t1);
  return r;
}

Outcome selection_trained(const PipelineRun& r) {
  Outcome o;
  for (const auto& c : r.report.categories) {
    if (c.extrapolation) continue;
    const double acc = c.acc_mean.value_or(0.0);
    o.detail << "cat" << c.category_id << " " << short_name(c.ctype) << " Acc " << std::setprecision(3) << acc
             << " ConAcc " << c.conacc_mean << "; ";
    o.require(acc >= 0.90, "Acc >= 0.90");
    o.require(c.conacc_mean >= 0.80, "ConAcc >= 0.80");
  }
  o.require(r.train_eval_seconds < 1800.0, "train+eval < 30 min");
  o.detail << "train+eval " << std::setprecision(4) << r.train_eval_seconds << " s";
  return o;
}

Outcome selection_extrapolation(const PipelineRun& r) {
  Outcome o;
  int seen = 0;
  for (const auto& c : r.report.categories) {
    if (!c.extrapolation) continue;
    const double acc = c.acc_mean.value_or(0.0);
    o.detail << "cat" << c.category_id << " " << short_name(c.ctype) << " Acc " << std::setprecision(3) << acc
             << " ConAcc " << c.conacc_mean << "; ";
    o.require(acc >= 0.70, "Acc >= 0.70");
    ++seen;
  }
  o.require(seen > 0, "held-out category evaluated");
  return o;
}

Outcome correspondence(const PipelineRun& full, const RunConfig& config) {
  Outcome o;
  RunConfig ablated = config;
  ablated.train.similarity_steps = 0;
  const auto ab = train_model(ablated, full.demos.train);
  const auto videos = eval_videos(full.demos);
  for (const auto& [ct, ca] : full.correspondence) {
    const auto abl = correspondence_analysis(ablated, ab.model, videos, ct);
    const double ratio = ca.model_dispersion / ca.random_dispersion;
    o.detail << short_name(ct) << " dispersion " << std::setprecision(4) << ca.model_dispersion << " random "
             << ca.random_dispersion << " ratio " << ratio << " N2=0 " << abl.model_dispersion << "; ";
    o.require(ratio <= 0.5, std::string(short_name(ct)) + " ratio <= 0.5");
    o.require(abl.model_dispersion > ca.model_dispersion, std::string(short_name(ct)) + " N2=0 dispersion higher");
  }
  return o;
}

Outcome servo(const PipelineRun& r, const RunConfig& config, const std::vector<CategoryScene>& scenes) {
  Outcome o;
  auto random = make_random_selector(config, false);
  int learned_total = 0, random_total = 0;
  for (std::size_t c = 0; c < scenes.size(); ++c) {
    int ok = 0;
    for (const auto& t : r.servo[c]) ok += t.success ? 1 : 0;
    const auto base = run_servo_trials(config, scenes[c], *random, 10);
    int rok = 0;
    for (const auto& t : base) rok += t.success ? 1 : 0;
    learned_total += ok;
    random_total += rok;
    o.detail << "cat" << scenes[c].category_id << " " << ok << "/10 (random " << rok << "/10); ";
    o.require(ok >= (scenes[c].trained ? 9 : 7), "success count for category " + std::to_string(c));
  }
  o.require(random_total < learned_total, "random baseline lower");
  o.require(r.servo_seconds < 300.0, "40 trials < 5 min");
  o.detail << "trials " << std::setprecision(3) << r.servo_seconds << " s";
  return o;
}

Outcome reproducibility(const PipelineRun& a, const PipelineRun& b) {
  Outcome o;
  auto stage = [&](const char* name, const std::string& x, const std::string& y) {
    o.detail << name << (x == y ? " identical" : " DIFFERS") << "; ";
    o.require(x == y, name);
  };
  stage("demos", a.demo_text, b.demo_text);
  stage("model", a.model_text, b.model_text);
  stage("metrics", a.metrics_text, b.metrics_text);
  stage("selection", a.report_text, b.report_text);
  stage("correspondence", a.correspondence_text, b.correspondence_text);
  stage("servo", a.servo_text, b.servo_text);
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance checks", "covgs_acceptance"};
  std::string out = "acceptance_out";
  app.add_option("--out", out, "directory for the report and artifacts");
  CLI11_PARSE(app, argc, argv);

  int failures = 0;
  auto report = [&](int n, const std::string& title, Outcome o) {
    std::ostringstream line;
    line << (o.pass ? "PASS" : "FAIL") << " criterion " << n << ": " << title << " (" << o.detail.str() << ")";
    std::cout << line.str() << std::endl;
    g_report << line.str() << "\n";
    failures += o.pass ? 0 : 1;
  };
  auto guarded = [&](int n, const std::string& title, const std::function<Outcome()>& f) {
    try {
      report(n, title, f());
    } catch (const std::exception& e) {
      Outcome o;
      o.pass = false;
      o.detail << "exception: " << e.what();
      report(n, title, std::move(o));
    }
  };

  guarded(1, "formula oracles", formula_oracles);
  guarded(2, "permutation invariance", permutation_invariance);
  guarded(3, "gradient correctness", gradient_correctness);
  guarded(4, "Broyden and controller", broyden_controller);

  const RunConfig config;
  std::optional<PipelineRun> first, second;
  std::vector<CategoryScene> scenes;
  try {
    scenes = build_scenes(config);
    log("pipeline run 1");
    first = run_pipeline(config, scenes);
    log(selection_report_table(first->report));
  } catch (const std::exception& e) {
    log(std::string("pipeline failed: ") + e.what());
  }
  auto with_first = [&](const std::function<Outcome()>& f) {
    return [&, f] {
      if (!first) throw std::runtime_error("pipeline did not complete");
      return f();
    };
  };
  guarded(5, "selection on trained categories", with_first([&] { return selection_trained(*first); }));
  guarded(6, "selection on the unseen category", with_first([&] { return selection_extrapolation(*first); }));
  guarded(7, "correspondence and N2=0 ablation", with_first([&] { return correspondence(*first, config); }));
  guarded(8, "closed-loop servo", with_first([&] { return servo(*first, config, scenes); }));
  guarded(9, "reproducibility", with_first([&] {
            log("pipeline run 2");
            second = run_pipeline(config, scenes);
            return reproducibility(*first, *second);
          }));

  try {
    fs::create_directories(out);
    write_file_atomic((fs::path(out) / "acceptance_report.txt").string(), g_report.str());
    if (first) {
      write_file_atomic((fs::path(out) / "model.json").string(), first->model_text);
      write_file_atomic((fs::path(out) / "selection_report.csv").string(), first->report_text);
    }
  } catch (const std::exception& e) {
    std::cerr << "cannot write report: " << e.what() << "\n";
  }
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
