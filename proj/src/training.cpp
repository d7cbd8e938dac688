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

#include "covgs/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <unordered_map>

#include "covgs/errors.hpp"
#include "covgs/kernels.hpp"
#include "covgs/rng.hpp"

namespace covgs {
namespace {

using Eigen::VectorXd;

constexpr double kNormEps = 1e-12;

double softplus(double y) { return std::max(y, 0.0) + std::log1p(std::exp(-std::abs(y))); }

struct TemporalTerm {
  double loss = 0.0;
  std::vector<double> d_earlier;
  std::vector<double> d_later;
};

// Loss and score gradients for one state-change sample over k matched candidates.
TemporalTerm temporal_term(std::span<const double> s_earlier, std::span<const double> s_later,
                           std::span<const double> n_earlier, std::span<const double> n_later, double alpha,
                           double tau) {
  const std::size_t k = s_earlier.size();
  const std::vector<char> all(k, 1);
  const auto pe = softmax(s_earlier, all, tau);
  const auto pl = softmax(s_later, all, tau);
  std::vector<double> cost(k);
  TemporalTerm t;
  double ce = 0.0, cl = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    cost[i] = softplus(-alpha * (n_earlier[i] - n_later[i]));
    t.loss += 0.5 * (pe[i] + pl[i]) * cost[i];
    ce += pe[i] * cost[i];
    cl += pl[i] * cost[i];
  }
  t.d_earlier.resize(k);
  t.d_later.resize(k);
  for (std::size_t i = 0; i < k; ++i) {
    t.d_earlier[i] = 0.5 * pe[i] * (cost[i] - ce) / tau;
    t.d_later[i] = 0.5 * pl[i] * (cost[i] - cl) / tau;
  }
  return t;
}

// d cos(a, b) / d a with the same epsilon convention as cosine_similarity().
VectorXd cosine_grad(const VectorXd& a, const VectorXd& b) {
  const double na = a.norm(), nb = b.norm();
  const double den = (na + kNormEps) * (nb + kNormEps);
  VectorXd g = b / den;
  if (na > 0.0) g -= (a.dot(b) / (den * (na + kNormEps) * na)) * a;
  return g;
}

struct WeightedMean {
  VectorXd zbar;
  std::vector<double> p;
};

WeightedMean weighted_mean(std::span<const VectorXd* const> z, std::span<const double> s, double tau) {
  const std::vector<char> all(s.size(), 1);
  WeightedMean w{VectorXd::Zero(z.front()->size()), softmax(s, all, tau)};
  for (std::size_t i = 0; i < z.size(); ++i) w.zbar += w.p[i] * *z[i];
  return w;
}

// Pushes d(loss)/d(zbar) back onto candidate embeddings and scores.
void distribute(const WeightedMean& w, std::span<const VectorXd* const> z, const VectorXd& g, double tau,
                double scale, std::span<VectorXd*> dz, std::span<double*> ds) {
  for (std::size_t i = 0; i < z.size(); ++i) {
    *dz[i] += (scale * w.p[i]) * g;
    *ds[i] += scale * w.p[i] * (*z[i] - w.zbar).dot(g) / tau;
  }
}

bool valid_error(const GraphInstance& inst, double* norm) {
  try {
    *norm = error_vector(inst).norm();
    return true;
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::kDegenerateLine) throw;
    return false;
  }
}

struct TemporalLayout {
  std::vector<EncoderInput> inputs;  // earlier matched, then later matched
  std::vector<double> n_earlier, n_later;
};

TemporalLayout temporal_layout(std::span<const GraphInstance> earlier, std::span<const GraphInstance> later) {
  std::unordered_map<CanonicalKey, std::size_t, CanonicalKeyHash> later_index;
  for (std::size_t j = 0; j < later.size(); ++j) later_index.emplace(later[j].canonical_key, j);
  TemporalLayout lay;
  std::vector<EncoderInput> later_inputs;
  for (const auto& e : earlier) {
    auto it = later_index.find(e.canonical_key);
    if (it == later_index.end()) continue;
    const auto& l = later[it->second];
    double ne = 0.0, nl = 0.0;
    if (!valid_error(e, &ne) || !valid_error(l, &nl)) continue;
    lay.inputs.push_back(encoder_input(e));
    later_inputs.push_back(encoder_input(l));
    lay.n_earlier.push_back(ne);
    lay.n_later.push_back(nl);
  }
  if (lay.inputs.empty()) {
    throw Error(ErrorKind::kMissingCorrespondence, "no candidate is present in both frames");
  }
  for (auto& in : later_inputs) lay.inputs.push_back(std::move(in));
  return lay;
}

LossHead temporal_head(const TemporalLayout& lay, double alpha, double tau) {
  return [&lay, alpha, tau](const CandidateOutputs& out) {
    const std::size_t k = lay.n_earlier.size();
    std::span<const double> s(out.score);
    auto t = temporal_term(s.subspan(0, k), s.subspan(k, k), lay.n_earlier, lay.n_later, alpha, tau);
    HeadGradient hg;
    hg.loss = t.loss;
    hg.dz.assign(2 * k, VectorXd());
    hg.dscore = t.d_earlier;
    hg.dscore.insert(hg.dscore.end(), t.d_later.begin(), t.d_later.end());
    return hg;
  };
}

struct SimilarityLayout {
  std::vector<EncoderInput> inputs;
  // Per pair: [begin_a, end_a) and [end_a, end_b) into inputs.
  std::vector<std::array<std::size_t, 3>> ranges;
};

std::size_t append_valid(const std::vector<GraphInstance>& frame, std::vector<EncoderInput>& inputs) {
  std::size_t added = 0;
  for (const auto& inst : frame) {
    double norm = 0.0;
    if (!valid_error(inst, &norm)) continue;
    inputs.push_back(encoder_input(inst));
    ++added;
  }
  if (added == 0) throw Error(ErrorKind::kNoValidCandidates, "frame without valid candidates");
  return added;
}

SimilarityLayout similarity_layout(std::span<const FramePair> pairs) {
  if (pairs.empty()) throw Error(ErrorKind::kEmptyDataset, "similarity loss needs at least one pair");
  SimilarityLayout lay;
  for (const auto& [a, b] : pairs) {
    const std::size_t begin = lay.inputs.size();
    const std::size_t mid = begin + append_valid(a, lay.inputs);
    const std::size_t end = mid + append_valid(b, lay.inputs);
    lay.ranges.push_back({begin, mid, end});
  }
  return lay;
}

LossHead similarity_head(const SimilarityLayout& lay, double tau) {
  return [&lay, tau](const CandidateOutputs& out) {
    HeadGradient hg;
    const std::size_t total = out.z.size();
    hg.dz.assign(total, VectorXd::Zero(out.z.front().size()));
    hg.dscore.assign(total, 0.0);
    const double scale = 1.0 / static_cast<double>(lay.ranges.size());
    for (const auto& [begin, mid, end] : lay.ranges) {
      std::vector<const VectorXd*> za, zb;
      std::vector<VectorXd*> dza, dzb;
      std::vector<double*> dsa, dsb;
      for (std::size_t i = begin; i < mid; ++i) {
        za.push_back(&out.z[i]);
        dza.push_back(&hg.dz[i]);
        dsa.push_back(&hg.dscore[i]);
      }
      for (std::size_t i = mid; i < end; ++i) {
        zb.push_back(&out.z[i]);
        dzb.push_back(&hg.dz[i]);
        dsb.push_back(&hg.dscore[i]);
      }
      std::span<const double> s(out.score);
      const auto wa = weighted_mean(za, s.subspan(begin, mid - begin), tau);
      const auto wb = weighted_mean(zb, s.subspan(mid, end - mid), tau);
      hg.loss -= scale * cosine_similarity(wa.zbar, wb.zbar);
      distribute(wa, za, -cosine_grad(wa.zbar, wb.zbar), tau, scale, dza, dsa);
      distribute(wb, zb, -cosine_grad(wb.zbar, wa.zbar), tau, scale, dzb, dsb);
    }
    return hg;
  };
}

double forward_loss(const TaskFunctionParams& params, std::span<const EncoderInput> inputs,
                    const LossHead& head) {
  std::vector<ForwardTape> tapes(inputs.size());
  CandidateOutputs out;
  kernels::forward_batch(params, inputs, tapes, out);
  const double loss = head(out).loss;
  if (!std::isfinite(loss)) throw Error(ErrorKind::kNonFiniteLoss, "loss is not finite");
  return loss;
}

std::string ctype_label(ConstraintType t) { return std::string(short_name(t)); }

}  // namespace

void TrainConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorKind::kConfig, msg); };
  if (!(alpha > 0.0)) fail("alpha must be positive");
  if (optimizer != "adam" && optimizer != "sgd") fail("optimizer must be 'adam' or 'sgd'");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    fail("Adam decay rates must lie in [0, 1)");
  }
  if (!(adam_eps > 0.0)) fail("adam_eps must be positive");
  if (!(ll_error_scale > 0.0)) fail("ll_error_scale must be positive");
  if (!(beta > 0.0 && beta < 1.0)) fail("beta must lie strictly inside (0, 1)");
  if (outer_iters < 0 || temporal_steps < 0 || similarity_steps < 0) fail("iteration counts must be non-negative");
  if (!(lr_temporal > 0.0) || !(lr_similarity > 0.0)) fail("learning rates must be positive");
  if (batch_size <= 0) fail("batch size must be positive");
  if (stride <= 0) fail("stride must be positive");
  if (!(tau > 0.0)) fail("tau must be positive");
  if (top_p <= 0) fail("top_p must be positive");
  if (checkpoint_every < 0) fail("checkpoint interval must be non-negative");
}

PreparedDataset prepare_datasets(std::span<const DemoVideo> videos, int stride, ConstraintType ctype,
                                 const EnumerationLimits& limits, std::uint64_t seed) {
  if (stride <= 0) throw Error(ErrorKind::kConfig, "stride must be positive");
  PreparedDataset data;
  data.ctype = ctype;
  for (std::size_t v = 0; v < videos.size(); ++v) {
    const auto& video = videos[v];
    for (std::size_t t = 1; t < video.frames.size(); ++t) {
      if (video.frames[t].index <= video.frames[t - 1].index) {
        throw Error(ErrorKind::kData, "frame indices of video '" + video.video_id + "' are not increasing");
      }
    }
    data.category.push_back(video.category_id);
    for (std::size_t t = 0; t + static_cast<std::size_t>(stride) < video.frames.size(); ++t) {
      data.samples.push_back({v, t, t + static_cast<std::size_t>(stride)});
    }

    VideoSlots slots;
    std::unordered_map<CanonicalKey, std::vector<std::uint32_t>, CanonicalKeyHash> by_key;
    std::vector<FrameCandidates> frames;
    frames.reserve(video.frames.size());
    for (std::size_t t = 0; t < video.frames.size(); ++t) {
      const auto& feats = video.frames[t].features;
      FrameCandidates fc;
      EnumerationLimits lim = limits;
      lim.seed = mix_seed(limits.seed, mix_seed(v, t));
      try {
        fc.refs = enumerate_refs(feats, ctype, lim);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::kTooFewFeatures) throw;
      }
      fc.valid.resize(fc.refs.size());
      fc.error_norm.resize(fc.refs.size());
      fc.slot.resize(fc.refs.size());
      for (std::size_t i = 0; i < fc.refs.size(); ++i) {
        const auto& ref = fc.refs[i];
        try {
          fc.error_norm[i] = error_vector(feats, ctype, ref).norm();
          fc.valid[i] = 1;
        } catch (const Error& e) {
          if (e.kind() != ErrorKind::kDegenerateLine) throw;
          fc.valid[i] = 0;
        }
        const int n = spec_for(ctype).node_count;
        const auto D = feats[ref.nodes[0]].descriptor.size();
        Eigen::MatrixXd x(D, n);
        for (int j = 0; j < n; ++j) {
          if (feats[ref.nodes[j]].descriptor.size() != D) {
            throw Error(ErrorKind::kDimensionMismatch, "non-uniform descriptor dimension");
          }
          x.col(j) = feats[ref.nodes[j]].descriptor;
        }
        auto& bucket = by_key[ref.key];
        std::uint32_t found = UINT32_MAX;
        for (auto s : bucket) {
          if (slots.inputs[s].descriptors == x) {
            found = s;
            break;
          }
        }
        if (found == UINT32_MAX) {
          found = static_cast<std::uint32_t>(slots.inputs.size());
          slots.inputs.push_back({ctype, std::move(x)});
          slots.keys.push_back(ref.key);
          bucket.push_back(found);
        }
        fc.slot[i] = found;
      }
      frames.push_back(std::move(fc));
    }
    data.candidates.push_back(std::move(frames));
    data.slots.push_back(std::move(slots));
  }
  if (data.samples.empty()) {
    throw Error(ErrorKind::kEmptyDataset, "no video has more than " + std::to_string(stride) + " frames");
  }
  Rng rng(seed);
  std::shuffle(data.samples.begin(), data.samples.end(), rng);
  return data;
}

double cosine_similarity(const VectorXd& a, const VectorXd& b) {
  const double na = a.norm(), nb = b.norm();
  if (na < kNormEps && nb < kNormEps) {
    throw Error(ErrorKind::kZeroNormEmbedding, "both embeddings are numerically zero");
  }
  return a.dot(b) / ((na + kNormEps) * (nb + kNormEps));
}

double temporal_order_loss(const TaskFunctionParams& params, std::span<const GraphInstance> earlier,
                           std::span<const GraphInstance> later, double alpha, double tau) {
  const auto lay = temporal_layout(earlier, later);
  return forward_loss(params, lay.inputs, temporal_head(lay, alpha, tau));
}

GradientResult temporal_order_gradient(const TaskFunctionParams& params, std::span<const GraphInstance> earlier,
                                       std::span<const GraphInstance> later, double alpha, double tau) {
  const auto lay = temporal_layout(earlier, later);
  return gradient(params, lay.inputs, temporal_head(lay, alpha, tau));
}

double similarity_loss(const TaskFunctionParams& params, std::span<const FramePair> pairs, double tau) {
  const auto lay = similarity_layout(pairs);
  return forward_loss(params, lay.inputs, similarity_head(lay, tau));
}

GradientResult similarity_gradient(const TaskFunctionParams& params, std::span<const FramePair> pairs,
                                   double tau) {
  const auto lay = similarity_layout(pairs);
  return gradient(params, lay.inputs, similarity_head(lay, tau));
}

TaskFunctionParams momentum_blend(const TaskFunctionParams& theta, const TaskFunctionParams& theta_sim,
                                  double beta) {
  if (!theta.same_shape(theta_sim)) throw Error(ErrorKind::kShapeMismatch, "parameter shapes differ");
  TaskFunctionParams out(theta.hyper());
  out.values() = beta * theta.values() + (1.0 - beta) * theta_sim.values();
  return out;
}

namespace {

// Encoder inputs of every slot of the given videos, concatenated.
struct SlotBatch {
  std::vector<EncoderInput> inputs;
  std::map<std::size_t, std::size_t> offset;  // video -> first global slot
};

SlotBatch gather_slots(const PreparedDataset& data, const std::set<std::size_t>& videos) {
  SlotBatch sb;
  for (auto v : videos) {
    sb.offset[v] = sb.inputs.size();
    const auto& in = data.slots[v].inputs;
    sb.inputs.insert(sb.inputs.end(), in.begin(), in.end());
  }
  return sb;
}

GradientResult run_batch(const TaskFunctionParams& params, const SlotBatch& sb,
                         const std::function<double(const CandidateOutputs&, std::vector<VectorXd>&,
                                                    std::vector<double>&)>& head) {
  std::vector<ForwardTape> tapes(sb.inputs.size());
  CandidateOutputs out;
  kernels::forward_batch(params, sb.inputs, tapes, out);
  std::vector<VectorXd> dz(sb.inputs.size());
  std::vector<double> ds(sb.inputs.size(), 0.0);
  const double loss = head(out, dz, ds);
  if (!std::isfinite(loss)) throw Error(ErrorKind::kNonFiniteLoss, "batch loss is not finite");
  GradientResult res{loss, TaskFunctionParams(params.hyper())};
  kernels::backward_batch(params, tapes, dz, ds, res.grad);
  if (!res.grad.values().allFinite()) throw Error(ErrorKind::kNonFiniteLoss, "batch gradient is not finite");
  return res;
}

}  // namespace

GradientResult temporal_batch_gradient(const TaskFunctionParams& params, const PreparedDataset& data,
                                       std::span<const StateChangeSample> batch, double alpha, double tau) {
  std::set<std::size_t> videos;
  for (const auto& s : batch) videos.insert(s.video);
  const SlotBatch sb = gather_slots(data, videos);
  const double scale = batch.empty() ? 0.0 : 1.0 / static_cast<double>(batch.size());

  return run_batch(params, sb, [&](const CandidateOutputs& out, std::vector<VectorXd>&, std::vector<double>& ds) {
    double loss = 0.0;
    std::unordered_map<CanonicalKey, std::size_t, CanonicalKeyHash> later_index;
    std::vector<double> se, sl, ne, nl;
    std::vector<std::size_t> ge, gl;
    for (const auto& s : batch) {
      const auto& fe = data.candidates[s.video][s.earlier];
      const auto& fl = data.candidates[s.video][s.later];
      const std::size_t base = sb.offset.at(s.video);
      later_index.clear();
      for (std::size_t j = 0; j < fl.refs.size(); ++j) {
        if (fl.valid[j]) later_index.emplace(fl.refs[j].key, j);
      }
      se.clear(), sl.clear(), ne.clear(), nl.clear(), ge.clear(), gl.clear();
      for (std::size_t i = 0; i < fe.refs.size(); ++i) {
        if (!fe.valid[i]) continue;
        auto it = later_index.find(fe.refs[i].key);
        if (it == later_index.end()) continue;
        const std::size_t j = it->second;
        ge.push_back(base + fe.slot[i]);
        gl.push_back(base + fl.slot[j]);
        se.push_back(out.score[ge.back()]);
        sl.push_back(out.score[gl.back()]);
        ne.push_back(fe.error_norm[i]);
        nl.push_back(fl.error_norm[j]);
      }
      if (se.empty()) continue;
      const auto t = temporal_term(se, sl, ne, nl, alpha, tau);
      loss += scale * t.loss;
      for (std::size_t i = 0; i < ge.size(); ++i) {
        ds[ge[i]] += scale * t.d_earlier[i];
        ds[gl[i]] += scale * t.d_later[i];
      }
    }
    return loss;
  });
}

GradientResult similarity_batch_gradient(const TaskFunctionParams& params, const PreparedDataset& data,
                                         std::span<const SimilarityPair> batch, double tau) {
  std::set<std::size_t> videos;
  for (const auto& p : batch) {
    videos.insert(p.video_a);
    videos.insert(p.video_b);
  }
  const SlotBatch sb = gather_slots(data, videos);
  const double scale = batch.empty() ? 0.0 : 1.0 / static_cast<double>(batch.size());

  return run_batch(params, sb, [&](const CandidateOutputs& out, std::vector<VectorXd>& dz, std::vector<double>& ds) {
    double loss = 0.0;
    const auto dim = params.hyper().embedding;
    auto gather = [&](std::size_t video, std::size_t frame, std::vector<const VectorXd*>& z,
                      std::vector<double>& s, std::vector<VectorXd*>& dzp, std::vector<double*>& dsp) {
      const auto& fc = data.candidates[video][frame];
      const std::size_t base = sb.offset.at(video);
      z.clear(), s.clear(), dzp.clear(), dsp.clear();
      for (std::size_t i = 0; i < fc.refs.size(); ++i) {
        if (!fc.valid[i]) continue;
        const std::size_t g = base + fc.slot[i];
        if (dz[g].size() == 0) dz[g] = VectorXd::Zero(dim);
        z.push_back(&out.z[g]);
        s.push_back(out.score[g]);
        dzp.push_back(&dz[g]);
        dsp.push_back(&ds[g]);
      }
    };
    std::vector<const VectorXd*> za, zb;
    std::vector<double> sa, sbv;
    std::vector<VectorXd*> dza, dzb;
    std::vector<double*> dsa, dsb;
    for (const auto& p : batch) {
      gather(p.video_a, p.frame_a, za, sa, dza, dsa);
      gather(p.video_b, p.frame_b, zb, sbv, dzb, dsb);
      if (za.empty() || zb.empty()) continue;
      const auto wa = weighted_mean(za, sa, tau);
      const auto wb = weighted_mean(zb, sbv, tau);
      if (wa.zbar.norm() < kNormEps && wb.zbar.norm() < kNormEps) continue;
      loss -= scale * cosine_similarity(wa.zbar, wb.zbar);
      distribute(wa, za, -cosine_grad(wa.zbar, wb.zbar), tau, scale, dza, dsa);
      distribute(wb, zb, -cosine_grad(wb.zbar, wa.zbar), tau, scale, dzb, dsb);
    }
    return loss;
  });
}

Optimizer::Optimizer(const TrainConfig& config, double lr, std::size_t size)
    : adam_(config.optimizer == "adam"),
      lr_(lr),
      b1_(config.adam_beta1),
      b2_(config.adam_beta2),
      eps_(config.adam_eps) {
  if (adam_) {
    m_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(size));
    v_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(size));
  }
}

void Optimizer::step(Eigen::VectorXd& theta, const Eigen::VectorXd& grad) {
  if (!adam_) {
    theta -= lr_ * grad;
    return;
  }
  ++t_;
  m_ = b1_ * m_ + (1.0 - b1_) * grad;
  v_ = b2_ * v_ + (1.0 - b2_) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
  theta.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
}

TrainResult covgs_il(std::span<const DemoVideo> videos, const TrainConfig& config, ConstraintType ctype,
                     const CheckpointFn& checkpoint) {
  config.validate();
  std::set<int> categories;
  for (const auto& v : videos) categories.insert(v.category_id);
  if (categories.size() < 2) {
    throw Error(ErrorKind::kEmptyDataset, "similarity pairs need videos from at least two categories");
  }
  const std::string label = ctype_label(ctype);
  const PreparedDataset data =
      prepare_datasets(videos, config.stride, ctype, config.limits, derive_seed(config.seed, "train.shuffle." + label));
  for (const auto& s : data.slots) {
    if (!s.inputs.empty() && s.inputs.front().descriptors.rows() != config.hyper.descriptor_dim) {
      throw Error(ErrorKind::kDimensionMismatch, "descriptor dimension differs from the model's");
    }
  }

  TrainResult result{TaskFunctionParams::random(config.hyper, derive_seed(config.seed, "train.init." + label)),
                     {}, false, {}};
  TaskFunctionParams& theta = result.params;
  Rng rng(derive_seed(config.seed, "train.batches." + label));

  // Samples ordered video by video (video order and within-video order
  // shuffled each epoch) so a batch touches few videos.
  std::vector<std::vector<StateChangeSample>> per_video(videos.size());
  for (const auto& s : data.samples) per_video[s.video].push_back(s);
  std::vector<StateChangeSample> epoch;
  std::size_t cursor = 0;
  auto refill = [&] {
    std::vector<std::size_t> order(videos.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    epoch.clear();
    for (auto v : order) {
      auto samples = per_video[v];
      std::shuffle(samples.begin(), samples.end(), rng);
      epoch.insert(epoch.end(), samples.begin(), samples.end());
    }
    cursor = 0;
  };
  refill();
  auto next_temporal_batch = [&] {
    std::vector<StateChangeSample> batch;
    while (static_cast<int>(batch.size()) < config.batch_size) {
      if (cursor >= epoch.size()) refill();
      batch.push_back(epoch[cursor++]);
    }
    return batch;
  };

  std::map<int, std::vector<std::size_t>> by_category;
  std::vector<std::vector<std::size_t>> usable_frames(videos.size());
  for (std::size_t v = 0; v < videos.size(); ++v) {
    for (std::size_t t = 0; t < data.candidates[v].size(); ++t) {
      const auto& fc = data.candidates[v][t];
      if (std::any_of(fc.valid.begin(), fc.valid.end(), [](char c) { return c != 0; })) {
        usable_frames[v].push_back(t);
      }
    }
    if (!usable_frames[v].empty()) by_category[videos[v].category_id].push_back(v);
  }
  std::vector<int> usable_categories;
  for (const auto& [c, vids] : by_category) usable_categories.push_back(c);
  auto next_similarity_batch = [&] {
    std::vector<SimilarityPair> batch;
    if (usable_categories.size() < 2) return batch;
    std::uniform_int_distribution<std::size_t> pick_cat(0, usable_categories.size() - 1);
    const std::size_t ca = pick_cat(rng);
    std::size_t cb = pick_cat(rng);
    while (cb == ca) cb = pick_cat(rng);
    const auto& va_list = by_category[usable_categories[ca]];
    const auto& vb_list = by_category[usable_categories[cb]];
    const std::size_t va = va_list[std::uniform_int_distribution<std::size_t>(0, va_list.size() - 1)(rng)];
    const std::size_t vb = vb_list[std::uniform_int_distribution<std::size_t>(0, vb_list.size() - 1)(rng)];
    const auto& fa = usable_frames[va];
    const auto& fb = usable_frames[vb];
    for (int i = 0; i < config.batch_size; ++i) {
      const std::size_t ta = fa[std::uniform_int_distribution<std::size_t>(0, fa.size() - 1)(rng)];
      const std::size_t tb = fb[std::uniform_int_distribution<std::size_t>(0, fb.size() - 1)(rng)];
      batch.push_back({va, ta, vb, tb});
    }
    return batch;
  };

  const double alpha = ctype == ConstraintType::kLineToLine ? config.alpha * config.ll_error_scale : config.alpha;
  Optimizer opt_temporal(config, config.lr_temporal, theta.size());
  Optimizer opt_similarity(config, config.lr_similarity, theta.size());
  for (int n = 1; n <= config.outer_iters; ++n) {
    const auto start = std::chrono::steady_clock::now();
    const TaskFunctionParams last_good = theta;
    IterationMetrics m;
    m.outer_iter = n;
    try {
      for (int s = 0; s < config.temporal_steps; ++s) {
        const auto batch = next_temporal_batch();
        auto g = temporal_batch_gradient(theta, data, batch, alpha, config.tau);
        opt_temporal.step(theta.values(), g.grad.values());
        m.temporal_loss += g.loss / config.temporal_steps;
        m.grad_norm += g.grad.values().norm() / config.temporal_steps;
      }
      if (config.similarity_steps > 0) {
        TaskFunctionParams theta_sim = theta;
        for (int s = 0; s < config.similarity_steps; ++s) {
          const auto batch = next_similarity_batch();
          auto g = similarity_batch_gradient(theta_sim, data, batch, config.tau);
          opt_similarity.step(theta_sim.values(), g.grad.values());
          m.sim_loss += g.loss / config.similarity_steps;
        }
        theta = momentum_blend(theta, theta_sim, config.beta);
      }
      if (!theta.values().allFinite()) throw Error(ErrorKind::kNonFiniteLoss, "parameters became non-finite");
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kNonFiniteLoss) throw;
      theta = last_good;
      result.aborted = true;
      result.abort_reason = e.what();
      return result;
    }
    m.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    result.metrics.push_back(m);
    if (checkpoint && config.checkpoint_every > 0 && n % config.checkpoint_every == 0) checkpoint(n, theta);
  }
  return result;
}

}  // namespace covgs
