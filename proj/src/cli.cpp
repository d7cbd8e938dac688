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

#include "covgs/cli.hpp"

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <json.hpp>
#include <ostream>
#include <sstream>

#include "covgs/errors.hpp"
#include "covgs/pipeline.hpp"

namespace covgs {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
};

std::string out_dir(const Common& c) {
  if (!c.out.empty()) return c.out;
  if (const char* env = std::getenv(kOutDirEnv); env != nullptr && *env != '\0') return env;
  return "covgs_out";
}

RunConfig load_config(const Common& c) {
  RunConfig config = c.config_path.empty() ? RunConfig{} : load_run_config(c.config_path);
  if (c.seed) config.seed = *c.seed;
  return config;
}

void make_dirs(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec || !fs::is_directory(p)) {
    throw Error(ErrorKind::kIo, "cannot create directory '" + p.string() + "': " + ec.message());
  }
}

void archive_config(const RunConfig& config, const fs::path& dir) {
  config.validate();
  write_file_atomic((dir / "run_config.json").string(), dump_run_config(config));
}

json vec3(const Eigen::Vector3d& v) { return {v.x(), v.y(), v.z()}; }

const char* role_name(FeatureRole r) {
  switch (r) {
    case FeatureRole::kTaskPoint: return "task_point";
    case FeatureRole::kTaskLineEndpoint: return "task_line_endpoint";
    case FeatureRole::kDistractor: return "distractor";
  }
  return "distractor";
}

std::string scene_manifest(const CategoryScene& cs, const std::vector<std::string>& video_ids) {
  json j;
  j["category_id"] = cs.category_id;
  j["trained"] = cs.trained;
  j["videos"] = video_ids;
  json tool = json::array();
  for (const auto& p : cs.scene.tool.points) {
    tool.push_back({{"id", p.id}, {"position", vec3(p.position)}, {"role", role_name(p.role)}});
  }
  j["tool_points"] = tool;
  json target = json::array();
  for (const auto& p : cs.scene.target.points) {
    target.push_back({{"id", p.id}, {"position", vec3(p.position)}, {"role", role_name(p.role)}});
  }
  j["target_points"] = target;
  j["goal"] = {{"PP", cs.goal.pp}, {"LL", cs.goal.ll}};
  const auto& cam = cs.scene.camera;
  j["camera"] = {{"fx", cam.fx}, {"fy", cam.fy}, {"cx", cam.cx}, {"cy", cam.cy},
                 {"width", cam.width}, {"height", cam.height}};
  return j.dump(2) + "\n";
}

void replace_dir(const fs::path& from, const fs::path& to) {
  std::error_code ec;
  fs::remove_all(to, ec);
  fs::rename(from, to, ec);
  if (ec) throw Error(ErrorKind::kIo, "cannot move '" + from.string() + "' to '" + to.string() + "': " + ec.message());
}

int cmd_demo_gen(const Common& c, std::optional<int> videos_per_category, std::ostream& out) {
  RunConfig config = load_config(c);
  if (videos_per_category) {
    config.sim.videos_per_category = *videos_per_category;
    config.sim.heldout_videos = *videos_per_category;
  }
  config.validate();
  const fs::path dir = out_dir(c);
  make_dirs(dir);
  const fs::path staging = dir / ".demo-gen.tmp";
  std::error_code ec;
  fs::remove_all(staging, ec);
  try {
    const auto scenes = build_scenes(config);
    const auto set = generate_demo_set(config, scenes);
    int files = 0;
    auto write_split = [&](const std::vector<DemoVideo>& videos, const fs::path& sub) {
      make_dirs(staging / sub);
      for (const auto& v : videos) {
        write_demo_file((staging / sub / (v.video_id + ".jsonl")).string(), std::span<const DemoVideo>(&v, 1));
        if (sub.begin()->string() == "demos") ++files;
      }
    };
    write_split(set.train, fs::path("demos") / "train");
    write_split(set.heldout, fs::path("demos") / "heldout");
    write_split(set.eval, "eval");
    make_dirs(staging / "manifests");
    for (const auto& cs : scenes) {
      std::vector<std::string> ids;
      for (const auto* list : {&set.train, &set.eval, &set.heldout}) {
        for (const auto& v : *list) {
          if (v.category_id == cs.category_id) ids.push_back(v.video_id);
        }
      }
      write_file_atomic((staging / "manifests" / ("category_" + std::to_string(cs.category_id) + ".json")).string(),
                        scene_manifest(cs, ids));
    }
    for (const char* sub : {"demos", "eval", "manifests"}) replace_dir(staging / sub, dir / sub);
    fs::remove_all(staging, ec);
    archive_config(config, dir);
    out << "wrote " << files << " demo files (" << set.eval.size() << " evaluation videos) to " << dir.string()
        << "\n";
  } catch (...) {
    fs::remove_all(staging, ec);
    throw;
  }
  return kExitOk;
}

int cmd_train(const Common& c, std::string demos, std::optional<int> n2, std::optional<int> iters,
              std::ostream& out) {
  RunConfig config = load_config(c);
  if (n2) config.train.similarity_steps = *n2;
  if (iters) config.train.outer_iters = *iters;
  config.validate();
  const fs::path dir = out_dir(c);
  if (demos.empty()) demos = (dir / "demos" / "train").string();
  const auto videos = read_demos(demos);
  make_dirs(dir);
  archive_config(config, dir);
  ModelCheckpointFn checkpoint;
  if (config.train.checkpoint_every > 0) {
    make_dirs(dir / "checkpoints");
    checkpoint = [&](ConstraintType ct, int it, const TaskFunctionParams& p) {
      Model m;
      m.task_functions.emplace(ct, p);
      std::set<int> cats;
      for (const auto& v : videos) cats.insert(v.category_id);
      m.trained_categories.assign(cats.begin(), cats.end());
      write_model((dir / "checkpoints" / (std::string(short_name(ct)) + "_iter" + std::to_string(it) + ".json")).string(),
                  m);
    };
  }
  const TrainOutput result = train_model(config, videos, checkpoint);
  write_model((dir / "model.json").string(), result.model);
  for (const auto& [ct, metrics] : result.metrics) {
    write_file_atomic((dir / ("metrics_" + std::string(short_name(ct)) + ".csv")).string(), metrics_csv(metrics));
    if (!metrics.empty()) {
      out << short_name(ct) << ": temporal loss " << format_double(metrics.front().temporal_loss) << " -> "
          << format_double(metrics.back().temporal_loss) << " over " << metrics.size() << " iterations\n";
    }
  }
  out << "model written to " << (dir / "model.json").string() << "\n";
  if (!result.abort_reason.empty()) {
    for (const auto& [ct, why] : result.abort_reason) out << short_name(ct) << " aborted: " << why << "\n";
    return kExitNumeric;
  }
  return kExitOk;
}

std::vector<DemoVideo> read_all(const std::vector<std::string>& paths) {
  std::vector<DemoVideo> all;
  std::set<std::string> ids;
  for (const auto& p : paths) {
    for (auto& v : read_demos(p)) {
      if (!ids.insert(v.video_id).second) throw Error(ErrorKind::kData, "video '" + v.video_id + "' appears twice");
      all.push_back(std::move(v));
    }
  }
  return all;
}

std::vector<std::string> default_eval_paths(const fs::path& dir) {
  std::vector<std::string> paths;
  for (const auto& p : {dir / "eval", dir / "demos" / "heldout"}) {
    if (fs::is_directory(p)) paths.push_back(p.string());
  }
  if (paths.empty()) throw Error(ErrorKind::kData, "no evaluation demos under '" + dir.string() + "'");
  return paths;
}

int cmd_select_eval(const Common& c, std::string model_path, std::vector<std::string> demos, std::ostream& out) {
  RunConfig config = load_config(c);
  const fs::path dir = out_dir(c);
  if (model_path.empty()) model_path = (dir / "model.json").string();
  if (demos.empty()) demos = default_eval_paths(dir);
  const Model model = read_model(model_path);
  const auto videos = read_all(demos);
  make_dirs(dir);
  archive_config(config, dir);
  std::vector<ConstraintType> ctypes;
  for (const auto& [ct, _] : model.task_functions) ctypes.push_back(ct);
  TaskFunctionSelector selector(model.task_functions, effective_limits(config), config.train.tau);
  const auto report = evaluate_selection(selector, videos, ctypes, model.trained_categories, config.bridge_frames);
  auto random = make_random_selector(config, true);
  const auto baseline = evaluate_selection(*random, videos, ctypes, model.trained_categories, config.bridge_frames);
  write_file_atomic((dir / "selection_report.csv").string(), selection_report_csv(report));
  write_file_atomic((dir / "selection_report.txt").string(), selection_report_table(report));
  write_file_atomic((dir / "selection_report_random.csv").string(), selection_report_csv(baseline));
  write_file_atomic((dir / "selection_report_random.txt").string(), selection_report_table(baseline));
  out << "Task function\n" << selection_report_table(report) << "\nRandom selector\n"
      << selection_report_table(baseline);
  std::ostringstream summary;
  summary << "ctype,model_dispersion,random_dispersion,ratio\n";
  for (auto ct : ctypes) {
    const auto ca = correspondence_analysis(config, model, videos, ct);
    const std::string name(short_name(ct));
    write_file_atomic((dir / ("correspondence_" + name + ".csv")).string(), matrix_csv(ca.model, ca.rows));
    write_file_atomic((dir / ("correspondence_" + name + "_random.csv")).string(), matrix_csv(ca.random, ca.rows));
    const double ratio = ca.random_dispersion > 0.0 ? ca.model_dispersion / ca.random_dispersion : 0.0;
    summary << name << "," << format_double(ca.model_dispersion) << "," << format_double(ca.random_dispersion) << ","
            << format_double(ratio) << "\n";
    out << "\n" << name << " correspondence dispersion: model " << std::setprecision(4) << ca.model_dispersion
        << ", random " << ca.random_dispersion << "\n";
  }
  write_file_atomic((dir / "correspondence_summary.csv").string(), summary.str());
  return kExitOk;
}

int cmd_servo(const Common& c, std::string model_path, std::optional<int> trials, const std::string& baseline,
              std::optional<std::string> robot, std::ostream& out) {
  RunConfig config = load_config(c);
  if (trials) config.servo_trials = *trials;
  if (robot) config.robot = *robot;
  config.validate();
  if (baseline != "none" && baseline != "random") {
    throw Error(ErrorKind::kConfig, "--baseline must be 'none' or 'random'");
  }
  const fs::path dir = out_dir(c);
  if (model_path.empty()) model_path = (dir / "model.json").string();
  const Model model = read_model(model_path);
  for (auto ct : config.servo.ctypes) {
    if (!model.task_functions.count(ct)) {
      throw Error(ErrorKind::kConfig, "model has no " + std::string(short_name(ct)) + " task function for servo");
    }
  }
  make_dirs(dir);
  archive_config(config, dir);
  const auto scenes = build_scenes(config);
  TaskFunctionSelector learned(model.task_functions, effective_limits(config), config.train.tau);
  auto random = make_random_selector(config, false);
  std::vector<std::pair<std::string, InstanceSelector*>> selectors{{"task_function", &learned}};
  if (baseline == "random") selectors.emplace_back("random", random.get());

  std::ostringstream csv;
  csv << "category,extrapolation,selector,trials,successes,success_rate\n";
  std::ostringstream table;
  table << "  category  extrapolation  selector        success\n";
  for (const auto& cs : scenes) {
    for (const auto& [name, sel] : selectors) {
      const auto results = run_servo_trials(config, cs, *sel, config.servo_trials);
      int ok = 0;
      if (!results.empty()) make_dirs(dir / "traces" / name);
      for (const auto& r : results) {
        ok += r.success ? 1 : 0;
        write_file_atomic((dir / "traces" / name /
                           ("cat" + std::to_string(r.category_id) + "_trial" + std::to_string(r.trial) + ".csv"))
                              .string(),
                          trace_csv(r.trace));
      }
      const double rate = results.empty() ? 0.0 : static_cast<double>(ok) / static_cast<double>(results.size());
      csv << cs.category_id << "," << (cs.trained ? 0 : 1) << "," << name << "," << results.size() << "," << ok << ","
          << format_double(rate) << "\n";
      table << std::setw(10) << cs.category_id << std::setw(15) << (cs.trained ? "no" : "yes") << "  " << std::left
            << std::setw(14) << name << std::right << std::setw(3) << ok << "/" << results.size() << "\n";
    }
  }
  write_file_atomic((dir / "servo_summary.csv").string(), csv.str());
  write_file_atomic((dir / "servo_summary.txt").string(), table.str());
  out << table.str();
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Graph-structured geometric task functions and uncalibrated visual servoing", "covgs"};
  app.require_subcommand(1);
  Common common;
  std::uint64_t seed = 0;
  app.add_option("--config", common.config_path, "RunConfig JSON file");
  auto* seed_opt = app.add_option("--seed", seed, "root seed (overrides the config)");
  app.add_option("--out", common.out, std::string("output directory (default $") + kOutDirEnv + " or covgs_out)");

  auto* demo_gen = app.add_subcommand("demo-gen", "generate the synthetic demonstration set");
  std::optional<int> videos_per_category;
  demo_gen->add_option("--videos-per-category", videos_per_category, "videos per training and held-out category");

  auto* train = app.add_subcommand("train", "learn task functions from demos");
  std::string train_demos;
  std::optional<int> n2, iters;
  train->add_option("--demos", train_demos, "demo file or directory (default <out>/demos/train)");
  train->add_option("--n2", n2, "similarity steps per outer iteration (0 disables)");
  train->add_option("--iters", iters, "outer iterations");

  auto* select_eval = app.add_subcommand("select-eval", "selection accuracy, consistency and correspondence");
  std::string eval_model;
  std::vector<std::string> eval_demos;
  select_eval->add_option("--model", eval_model, "model file (default <out>/model.json)");
  select_eval->add_option("--demos", eval_demos, "demo files or directories (default <out>/eval and <out>/demos/heldout)");

  auto* servo = app.add_subcommand("servo", "closed-loop servo trials per category");
  std::string servo_model, servo_baseline = "none";
  std::optional<int> trials;
  std::optional<std::string> robot;
  servo->add_option("--model", servo_model, "model file (default <out>/model.json)");
  servo->add_option("--trials", trials, "trials per category");
  servo->add_option("--baseline", servo_baseline, "none | random");
  servo->add_option("--robot", robot, "twist | arm");

  for (auto* sub : {demo_gen, train, select_eval, servo}) sub->fallthrough();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }
  if (seed_opt->count() > 0) common.seed = seed;

  try {
    if (*demo_gen) return cmd_demo_gen(common, videos_per_category, out);
    if (*train) return cmd_train(common, train_demos, n2, iters, out);
    if (*select_eval) return cmd_select_eval(common, eval_model, eval_demos, out);
    if (*servo) return cmd_servo(common, servo_model, trials, servo_baseline, robot, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitConfig;
}

}  // namespace covgs
