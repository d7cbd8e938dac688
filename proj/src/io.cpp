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

#include "covgs/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <unistd.h>

#include <json.hpp>

#include "covgs/errors.hpp"

namespace covgs {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

json frame_json(const DemoVideo& video, const Frame& frame, bool with_truth) {
  json j;
  j["video_id"] = video.video_id;
  j["category_id"] = video.category_id;
  j["frame_idx"] = frame.index;
  json feats = json::array();
  for (const auto& f : frame.features) {
    json jf;
    jf["id"] = f.id;
    jf["u"] = f.coords.u;
    jf["v"] = f.coords.v;
    jf["segment"] = f.segment;
    jf["descriptor"] = std::vector<double>(f.descriptor.data(), f.descriptor.data() + f.descriptor.size());
    feats.push_back(std::move(jf));
  }
  j["features"] = std::move(feats);
  if (with_truth && video.ground_truth) {
    json gt = json::object();
    for (const auto& [ct, ids] : video.ground_truth->bindings) gt[std::string(short_name(ct))] = ids;
    j["ground_truth"] = std::move(gt);
  }
  return j;
}

[[noreturn]] void data_error(const std::string& source, std::size_t line, const std::string& what) {
  throw Error(ErrorKind::kData, source + ":" + std::to_string(line) + ": " + what);
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string demo_to_jsonl(std::span<const DemoVideo> videos) {
  std::string out = json{{"schema", "covgs-demo"}, {"version", kDemoFormatVersion}}.dump() + "\n";
  for (const auto& video : videos) {
    for (std::size_t t = 0; t < video.frames.size(); ++t) {
      out += frame_json(video, video.frames[t], t == 0).dump() + "\n";
    }
  }
  return out;
}

std::vector<DemoVideo> demo_from_jsonl(const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  bool header = false;
  std::vector<DemoVideo> videos;
  std::map<std::string, std::size_t> index;
  long dim = -1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error&) {
      data_error(source, lineno, "not valid JSON");
    }
    if (!header) {
      if (!j.is_object() || j.value("schema", "") != "covgs-demo") data_error(source, lineno, "missing demo header");
      if (j.value("version", -1) != kDemoFormatVersion) {
        data_error(source, lineno, "unsupported demo format version");
      }
      header = true;
      continue;
    }
    try {
      const std::string vid = j.at("video_id").get<std::string>();
      auto [it, fresh] = index.emplace(vid, videos.size());
      if (fresh) {
        videos.emplace_back();
        videos.back().video_id = vid;
        videos.back().category_id = j.at("category_id").get<int>();
      }
      DemoVideo& video = videos[it->second];
      if (j.at("category_id").get<int>() != video.category_id) {
        data_error(source, lineno, "category of video '" + vid + "' changes");
      }
      Frame frame;
      frame.index = j.at("frame_idx").get<int>();
      if (!video.frames.empty() && frame.index <= video.frames.back().index) {
        data_error(source, lineno, "frame_idx not strictly increasing in video '" + vid + "'");
      }
      std::set<int> ids;
      for (const auto& jf : j.at("features")) {
        FeaturePoint f;
        f.id = jf.at("id").get<int>();
        f.coords = {jf.at("u").get<double>(), jf.at("v").get<double>()};
        f.segment = jf.value("segment", -1);
        const auto desc = jf.at("descriptor").get<std::vector<double>>();
        if (dim < 0) dim = static_cast<long>(desc.size());
        if (static_cast<long>(desc.size()) != dim) data_error(source, lineno, "descriptor dimension differs");
        if (!std::isfinite(f.coords.u) || !std::isfinite(f.coords.v)) data_error(source, lineno, "non-finite coordinate");
        f.descriptor = Eigen::Map<const Eigen::VectorXd>(desc.data(), static_cast<Eigen::Index>(desc.size()));
        if (!ids.insert(f.id).second) data_error(source, lineno, "duplicate feature id " + std::to_string(f.id));
        frame.features.push_back(std::move(f));
      }
      if (j.contains("ground_truth")) {
        GroundTruth gt;
        for (const auto& [name, ids_json] : j.at("ground_truth").items()) {
          const auto ct = parse_constraint_type(name);
          auto b = ids_json.get<std::vector<int>>();
          if (static_cast<int>(b.size()) != spec_for(ct).node_count) {
            data_error(source, lineno, "ground truth for " + name + " has the wrong node count");
          }
          gt.bindings[ct] = std::move(b);
        }
        video.ground_truth = std::move(gt);
      }
      video.frames.push_back(std::move(frame));
    } catch (const json::exception& e) {
      data_error(source, lineno, std::string("malformed frame record: ") + e.what());
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::kConfig) data_error(source, lineno, e.what());
      throw;
    }
  }
  if (!header) data_error(source, lineno, "empty demo file");
  return videos;
}

void write_demo_file(const std::string& path, std::span<const DemoVideo> videos) {
  write_file_atomic(path, demo_to_jsonl(videos));
}

std::vector<DemoVideo> read_demo_file(const std::string& path) { return demo_from_jsonl(read_file(path), path); }

std::vector<DemoVideo> read_demos(const std::string& path) {
  std::error_code ec;
  if (!fs::exists(path, ec)) throw Error(ErrorKind::kData, "demo path '" + path + "' does not exist");
  if (!fs::is_directory(path, ec)) return read_demo_file(path);
  std::vector<std::string> files;
  for (const auto& entry : fs::recursive_directory_iterator(path)) {
    if (entry.is_regular_file() && entry.path().extension() == ".jsonl") files.push_back(entry.path().string());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw Error(ErrorKind::kData, "no .jsonl demo files under '" + path + "'");
  std::vector<DemoVideo> all;
  std::set<std::string> ids;
  for (const auto& f : files) {
    for (auto& v : read_demo_file(f)) {
      if (!ids.insert(v.video_id).second) throw Error(ErrorKind::kData, "video '" + v.video_id + "' appears twice");
      all.push_back(std::move(v));
    }
  }
  return all;
}

std::string model_to_json(const Model& model) {
  json j;
  j["format"] = "covgs-model";
  j["version"] = kModelFormatVersion;
  j["trained_categories"] = model.trained_categories;
  json tfs = json::object();
  for (const auto& [ct, p] : model.task_functions) {
    json tf;
    const auto& h = p.hyper();
    tf["hyperparams"] = {{"descriptor_dim", h.descriptor_dim},
                         {"hidden", h.hidden},
                         {"embedding", h.embedding},
                         {"rounds", h.rounds}};
    json params = json::object();
    for (const auto& g : p.groups()) {
      const auto m = p.mat(static_cast<ParamGroup>(&g - p.groups().data()));
      if (g.is_bias) {
        std::vector<double> v(m.data(), m.data() + m.size());
        params[std::string(g.name)] = v;
      } else {
        json rows = json::array();
        for (int r = 0; r < g.rows; ++r) {
          std::vector<double> row(g.cols);
          for (int c = 0; c < g.cols; ++c) row[c] = m(r, c);
          rows.push_back(row);
        }
        params[std::string(g.name)] = std::move(rows);
      }
    }
    tf["params"] = std::move(params);
    tfs[std::string(short_name(ct))] = std::move(tf);
  }
  j["task_functions"] = std::move(tfs);
  return j.dump(1) + "\n";
}

Model model_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error&) {
    throw Error(ErrorKind::kData, "model file is not valid JSON");
  }
  if (!j.is_object() || j.value("format", "") != "covgs-model") {
    throw Error(ErrorKind::kData, "not a covgs model file");
  }
  if (j.value("version", -1) != kModelFormatVersion) {
    throw Error(ErrorKind::kData, "unsupported model version " + j.value("version", json(-1)).dump());
  }
  Model model;
  try {
    model.trained_categories = j.at("trained_categories").get<std::vector<int>>();
    for (const auto& [name, tf] : j.at("task_functions").items()) {
      const auto ct = parse_constraint_type(name);
      const auto& jh = tf.at("hyperparams");
      Hyperparams h{jh.at("descriptor_dim").get<int>(), jh.at("hidden").get<int>(), jh.at("embedding").get<int>(),
                    jh.at("rounds").get<int>()};
      if (h.descriptor_dim < 1 || h.hidden < 1 || h.embedding < 1 || h.rounds < 0) {
        throw Error(ErrorKind::kData, "invalid hyperparameters for " + name);
      }
      TaskFunctionParams p(h);
      const auto& jp = tf.at("params");
      if (jp.size() != p.groups().size()) throw Error(ErrorKind::kData, "parameter group count mismatch in " + name);
      for (std::size_t gi = 0; gi < p.groups().size(); ++gi) {
        const auto& g = p.groups()[gi];
        const std::string gname(g.name);
        if (!jp.contains(gname)) throw Error(ErrorKind::kData, "missing parameter group " + name + "/" + gname);
        auto m = p.mat(static_cast<ParamGroup>(gi));
        const auto& arr = jp.at(gname);
        if (g.is_bias) {
          const auto v = arr.get<std::vector<double>>();
          if (static_cast<int>(v.size()) != g.rows) throw Error(ErrorKind::kData, "shape mismatch in " + gname);
          for (int r = 0; r < g.rows; ++r) m(r, 0) = v[r];
        } else {
          const auto rows = arr.get<std::vector<std::vector<double>>>();
          if (static_cast<int>(rows.size()) != g.rows) throw Error(ErrorKind::kData, "shape mismatch in " + gname);
          for (int r = 0; r < g.rows; ++r) {
            if (static_cast<int>(rows[r].size()) != g.cols) throw Error(ErrorKind::kData, "shape mismatch in " + gname);
            for (int c = 0; c < g.cols; ++c) m(r, c) = rows[r][c];
          }
        }
      }
      if (!p.values().allFinite()) throw Error(ErrorKind::kData, "non-finite parameter in " + name);
      model.task_functions.emplace(ct, std::move(p));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kData, std::string("malformed model file: ") + e.what());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kConfig) throw Error(ErrorKind::kData, e.what());
    throw;
  }
  return model;
}

void write_model(const std::string& path, const Model& model) { write_file_atomic(path, model_to_json(model)); }

Model read_model(const std::string& path) { return model_from_json(read_file(path)); }

std::string metrics_csv(std::span<const IterationMetrics> metrics) {
  std::string out = "outer_iter,temporal_loss,sim_loss,grad_norm,wall_ms\n";
  for (const auto& m : metrics) {
    out += std::to_string(m.outer_iter) + "," + format_double(m.temporal_loss) + "," + format_double(m.sim_loss) +
           "," + format_double(m.grad_norm) + "," + format_double(m.wall_ms) + "\n";
  }
  return out;
}

std::string trace_csv(const ServoTrace& trace) {
  const auto n = trace.records.empty() ? 0 : trace.records.front().q.size();
  const auto d = trace.records.empty() ? 0 : trace.records.front().e.size();
  std::string out = "iter";
  for (Eigen::Index i = 0; i < n; ++i) out += ",q" + std::to_string(i);
  for (Eigen::Index i = 0; i < d; ++i) out += ",e" + std::to_string(i);
  out += ",err_norm,cond_J\n";
  for (const auto& r : trace.records) {
    out += std::to_string(r.iter);
    for (Eigen::Index i = 0; i < r.q.size(); ++i) out += "," + format_double(r.q[i]);
    for (Eigen::Index i = 0; i < r.e.size(); ++i) out += "," + format_double(r.e[i]);
    out += "," + format_double(r.err_norm) + "," + format_double(r.cond_j) + "\n";
  }
  return out;
}

std::string matrix_csv(const Eigen::MatrixXd& m, const std::vector<std::string>& row_labels) {
  std::string out = "row";
  for (Eigen::Index c = 0; c < m.cols(); ++c) out += ",t" + std::to_string(c);
  out += "\n";
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    out += r < static_cast<Eigen::Index>(row_labels.size()) ? row_labels[r] : std::to_string(r);
    for (Eigen::Index c = 0; c < m.cols(); ++c) out += "," + format_double(m(r, c));
    out += "\n";
  }
  return out;
}

std::string selection_report_csv(const SelectionEvalReport& report) {
  std::string out = "level,block,category_id,video_id,ctype,videos,acc,acc_std,conacc,conacc_std\n";
  auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
  for (const auto& c : report.categories) {
    out += std::string("category,") + (c.extrapolation ? "extrapolation" : "trained") + "," +
           std::to_string(c.category_id) + ",," + std::string(short_name(c.ctype)) + "," + std::to_string(c.videos) +
           "," + opt(c.acc_mean) + "," + opt(c.acc_std) + "," + format_double(c.conacc_mean) + "," +
           format_double(c.conacc_std) + "\n";
  }
  for (const auto& v : report.videos) {
    out += "video,," + std::to_string(v.category_id) + "," + v.video_id + "," + std::string(short_name(v.ctype)) +
           ",1," + opt(v.acc) + ",," + format_double(v.conacc) + ",\n";
  }
  return out;
}

std::string selection_report_table(const SelectionEvalReport& report) {
  std::ostringstream os;
  char buf[160];
  for (bool extra : {false, true}) {
    bool any = false;
    for (const auto& c : report.categories) any = any || c.extrapolation == extra;
    if (!any) continue;
    os << (extra ? "Extrapolation (unseen categories)\n" : "Trained categories\n");
    os << "  category  ctype  videos  Acc               ConAcc\n";
    for (const auto& c : report.categories) {
      if (c.extrapolation != extra) continue;
      std::string acc = "-";
      if (c.acc_mean) {
        std::snprintf(buf, sizeof buf, "%5.1f%% +- %4.1f%%", 100.0 * *c.acc_mean, 100.0 * *c.acc_std);
        acc = buf;
      }
      std::snprintf(buf, sizeof buf, "  %8d  %5s  %6d  %-16s  %.3f +- %.3f\n", c.category_id,
                    std::string(short_name(c.ctype)).c_str(), c.videos, acc.c_str(), c.conacc_mean, c.conacc_std);
      os << buf;
    }
  }
  return os.str();
}

void write_file_atomic(const std::string& path, const std::string& content) {
  const fs::path target(path);
  std::error_code ec;
  if (target.has_parent_path()) fs::create_directories(target.parent_path(), ec);
  if (ec) throw Error(ErrorKind::kIo, "cannot create directory for '" + path + "': " + ec.message());
  const std::string tmp = path + ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::kIo, "cannot write '" + path + "'");
    out << content;
    out.flush();
    if (!out) {
      out.close();
      fs::remove(tmp, ec);
      throw Error(ErrorKind::kIo, "short write to '" + path + "'");
    }
  }
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Error(ErrorKind::kIo, "cannot move '" + tmp + "' into place");
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kData, "cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace covgs
