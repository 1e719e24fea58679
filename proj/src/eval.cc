// Copyright 2026 The HR-Align Lab Authors
//
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

#include "hralign/eval.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "hralign/adapter.h"
#include "hralign/alignment.h"
#include "hralign/errors.h"
#include "hralign/optim.h"
#include "hralign/tensor_io.h"

namespace hralign {

using nlohmann::json;

EvalModel adapted_model(const ModelCheckpoint& ckpt, std::string tag) { return {&ckpt, true, std::move(tag)}; }

EvalModel frozen_model(const ModelCheckpoint& ckpt, std::string tag) { return {&ckpt, false, std::move(tag)}; }

namespace {

const ModelCheckpoint& checkpoint_of(const EvalModel& model) {
  if (!model.checkpoint) throw ArgumentError("EvalModel has no checkpoint");
  return *model.checkpoint;
}

bool uses_language(const ModelCheckpoint& ckpt) {
  return ckpt.config.method == Method::kHrAlign && ckpt.config.use_language && ckpt.query.has_value();
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

std::vector<double> to_vec(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

}  // namespace

Tensor clip_feature_map(const EvalModel& model, const VideoClip& clip) {
  const ModelCheckpoint& ckpt = checkpoint_of(model);
  const Backbone& net = ckpt.backbone;
  const bool hr = ckpt.config.method == Method::kHrAlign;
  const bool through_adapters = model.adapted && !(hr && clip.domain == Domain::kHuman);
  const Tensor nchw = frames_to_nchw(clip.frames);
  const Tensor out = through_adapters ? run_adapted(net, ckpt.adapters, nchw, 0)
                                      : net.run_blocks(nchw, 0, net.num_blocks());
  return nchw_to_frames(out).detach();
}

Tensor clip_embedding(const EvalModel& model, const VideoClip& clip, const TaskDescription& desc) {
  const ModelCheckpoint& ckpt = checkpoint_of(model);
  const Tensor fmap = clip_feature_map(model, clip);
  const bool norm = ckpt.config.normalize;
  if (uses_language(ckpt)) {
    return task_aware_pool(fmap, embed_task(*ckpt.query, desc).detach(), norm, Stream::kRobotFrozen).vector.detach();
  }
  return uniform_pool(fmap, norm, Stream::kRobotFrozen).vector.detach();
}

json RetrievalReport::to_json() const {
  return {{"tag", tag},
          {"pairs", pairs},
          {"robot_to_human_recall_at_1", robot_to_human_r1},
          {"robot_to_human_recall_at_5", robot_to_human_r5},
          {"human_to_robot_recall_at_1", human_to_robot_r1},
          {"human_to_robot_recall_at_5", human_to_robot_r5},
          {"mrr", mrr}};
}

std::string RetrievalReport::to_text() const {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "[%s] pairs=%zu  r->h R@1=%.4f R@5=%.4f  h->r R@1=%.4f R@5=%.4f  MRR=%.4f\n",
                tag.c_str(), pairs, robot_to_human_r1, robot_to_human_r5, human_to_robot_r1, human_to_robot_r5,
                mrr);
  return buf;
}

RetrievalReport retrieval_from_embeddings(const std::vector<std::vector<double>>& human,
                                          const std::vector<std::vector<double>>& robot, std::string tag) {
  const size_t n = human.size();
  if (robot.size() != n) throw DimensionError("retrieval: human and robot lists differ in length");
  if (n < 2) throw ArgumentError("retrieval needs at least 2 pairs");
  std::vector<std::vector<double>> score(n, std::vector<double>(n));
  for (size_t i = 0; i < n; ++i) {
    if (robot[i].size() != human[0].size() || human[i].size() != human[0].size()) {
      throw DimensionError("retrieval: embedding widths differ");
    }
    for (size_t j = 0; j < n; ++j) score[i][j] = dot(robot[i], human[j]);  // robot i vs human j
  }
  RetrievalReport r;
  r.pairs = n;
  r.tag = std::move(tag);
  double rr = 0.0;
  for (size_t i = 0; i < n; ++i) {
    size_t rank_rh = 1, rank_hr = 1;
    for (size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      if (score[i][j] >= score[i][i]) ++rank_rh;
      if (score[j][i] >= score[i][i]) ++rank_hr;
    }
    r.robot_to_human_r1 += rank_rh <= 1;
    r.robot_to_human_r5 += rank_rh <= 5;
    r.human_to_robot_r1 += rank_hr <= 1;
    r.human_to_robot_r5 += rank_hr <= 5;
    rr += 1.0 / static_cast<double>(rank_rh) + 1.0 / static_cast<double>(rank_hr);
  }
  const double dn = static_cast<double>(n);
  r.robot_to_human_r1 /= dn;
  r.robot_to_human_r5 /= dn;
  r.human_to_robot_r1 /= dn;
  r.human_to_robot_r5 /= dn;
  r.mrr = rr / (2.0 * dn);
  return r;
}

RetrievalReport eval_retrieval(const EvalModel& model, const std::vector<PairedDemo>& heldout) {
  if (heldout.size() < 2) throw ArgumentError("retrieval needs at least 2 pairs");
  std::vector<std::vector<double>> human, robot;
  for (const auto& p : heldout) {
    human.push_back(to_vec(clip_embedding(model, p.human, p.description)));
    robot.push_back(to_vec(clip_embedding(model, p.robot, p.description)));
  }
  return retrieval_from_embeddings(human, robot, model.tag);
}

json DownstreamReport::to_json() const {
  return {{"tag", tag},
          {"probe_accuracy", probe_accuracy},
          {"bc_action_error", bc_action_error},
          {"success_rate", success_rate},
          {"train_clips", train_clips},
          {"test_clips", test_clips}};
}

std::string DownstreamReport::to_text() const {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "[%s] train=%zu test=%zu  probe_acc=%.4f  bc_mse=%.6f  success=%.4f\n",
                tag.c_str(), train_clips, test_clips, probe_accuracy, bc_action_error, success_rate);
  return buf;
}

Split stratified_split(const std::vector<int>& labels, double test_fraction, uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ArgumentError("test fraction must be in (0, 1)");
  std::map<int, std::vector<size_t>> by_label;
  for (size_t i = 0; i < labels.size(); ++i) by_label[labels[i]].push_back(i);
  RngState rng(seed);
  Split s;
  for (auto& [label, idx] : by_label) {
    const std::vector<size_t> perm = shuffled_indices(idx.size(), rng);
    size_t n_test = 0;
    if (idx.size() >= 2) {
      n_test = std::clamp<size_t>(static_cast<size_t>(std::lround(test_fraction * static_cast<double>(idx.size()))),
                                  1, idx.size() - 1);
    }
    for (size_t k = 0; k < idx.size(); ++k) (k < n_test ? s.test : s.train).push_back(idx[perm[k]]);
  }
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.test.begin(), s.test.end());
  if (s.train.size() < 2 || s.test.empty()) {
    throw ArgumentError("split too small: " + std::to_string(s.train.size()) + " train / " +
                        std::to_string(s.test.size()) + " test items");
  }
  return s;
}

namespace {

struct Standardizer {
  std::vector<double> mean, inv_std;

  static Standardizer fit(const std::vector<std::vector<double>>& x, const std::vector<size_t>& rows) {
    const size_t d = x[rows[0]].size();
    Standardizer s{std::vector<double>(d, 0.0), std::vector<double>(d, 0.0)};
    for (size_t r : rows) {
      for (size_t j = 0; j < d; ++j) s.mean[j] += x[r][j];
    }
    for (double& m : s.mean) m /= static_cast<double>(rows.size());
    std::vector<double> var(d, 0.0);
    for (size_t r : rows) {
      for (size_t j = 0; j < d; ++j) var[j] += (x[r][j] - s.mean[j]) * (x[r][j] - s.mean[j]);
    }
    double total = 0.0;
    for (double& v : var) total += (v /= static_cast<double>(rows.size()));
    // Near-constant dimensions (dead ReLU sites) would otherwise blow up on
    // unseen inputs, so each sd is floored at a tenth of the typical one.
    const double floor_sd = 0.1 * std::sqrt(total / static_cast<double>(d));
    for (size_t j = 0; j < d; ++j) {
      const double sd = std::max(std::sqrt(var[j]), floor_sd);
      s.inv_std[j] = sd > 1e-12 ? 1.0 / sd : 0.0;
    }
    return s;
  }

  Tensor apply(const std::vector<std::vector<double>>& x, const std::vector<size_t>& rows) const {
    const size_t d = mean.size();
    std::vector<double> out;
    out.reserve(rows.size() * d);
    for (size_t r : rows) {
      for (size_t j = 0; j < d; ++j) out.push_back((x[r][j] - mean[j]) * inv_std[j]);
    }
    return Tensor({rows.size(), d}, std::move(out));
  }
};

Tensor dense(const Tensor& x, const Tensor& w, const Tensor& b) { return add_bias(matmul(x, w), b, 1); }

size_t argmax_row(std::span<const double> row) {
  return static_cast<size_t>(std::max_element(row.begin(), row.end()) - row.begin());
}

}  // namespace

double linear_probe_accuracy(const std::vector<std::vector<double>>& features, const std::vector<int>& labels,
                             const Split& split, const DownstreamOptions& options) {
  if (features.size() != labels.size()) throw DimensionError("probe: features and labels differ in length");
  std::vector<int> classes(labels);
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  auto class_of = [&classes](int label) {
    return static_cast<size_t>(std::lower_bound(classes.begin(), classes.end(), label) - classes.begin());
  };
  const Standardizer stdz = Standardizer::fit(features, split.train);
  const Tensor x_train = stdz.apply(features, split.train);
  const Tensor x_test = stdz.apply(features, split.test);
  std::vector<size_t> y_train;
  for (size_t r : split.train) y_train.push_back(class_of(labels[r]));

  const size_t d = x_train.dim(1), k = classes.size();
  std::vector<Tensor> params{Tensor::zeros({d, k}, true), Tensor::zeros({k}, true)};
  AdamState adam = AdamState::for_params(params, options.probe_learning_rate);
  for (size_t e = 0; e < options.probe_epochs; ++e) {
    cross_entropy(dense(x_train, params[0], params[1]), y_train).backward();
    adam_step(params, adam);
    zero_grads(params);
  }
  const Tensor logits = dense(x_test, params[0], params[1]);
  size_t correct = 0;
  for (size_t i = 0; i < split.test.size(); ++i) {
    if (argmax_row(logits.data().subspan(i * k, k)) == class_of(labels[split.test[i]])) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(split.test.size());
}

DownstreamReport eval_downstream(const EvalModel& model, const std::vector<PairedDemo>& robot_demos,
                                 const DownstreamOptions& options) {
  std::vector<int> labels;
  for (const auto& p : robot_demos) {
    if (p.robot.domain != Domain::kRobot) throw ArgumentError("downstream evaluation expects robot clips");
    if (!p.latent || p.latent->length() != p.robot.length()) {
      throw ArgumentError("downstream evaluation needs a latent trajectory per robot clip");
    }
    labels.push_back(p.robot.task_id);
  }
  if (robot_demos.size() < 4) throw ArgumentError("split too small: need at least 4 robot clips");
  const Split split = stratified_split(labels, options.test_fraction, options.seed);

  // Per-frame flattened maps, and their clip mean for the probe.
  std::vector<std::vector<std::vector<double>>> per_frame(robot_demos.size());
  std::vector<std::vector<double>> clip_mean(robot_demos.size());
  for (size_t i = 0; i < robot_demos.size(); ++i) {
    const Tensor fmap = clip_feature_map(model, robot_demos[i].robot);
    const size_t t = fmap.dim(0), d = fmap.size() / t;
    auto v = fmap.data();
    clip_mean[i].assign(d, 0.0);
    for (size_t f = 0; f < t; ++f) {
      per_frame[i].emplace_back(v.begin() + static_cast<std::ptrdiff_t>(f * d),
                                v.begin() + static_cast<std::ptrdiff_t>((f + 1) * d));
      for (size_t j = 0; j < d; ++j) clip_mean[i][j] += v[f * d + j] / static_cast<double>(t);
    }
  }

  DownstreamReport report;
  report.tag = model.tag;
  report.train_clips = split.train.size();
  report.test_clips = split.test.size();
  report.probe_accuracy = linear_probe_accuracy(clip_mean, labels, split, options);

  // Behavior cloning: frame t features -> effector position at t + 1.
  std::vector<std::vector<double>> bc_x;
  std::vector<double> bc_y;
  RngState pick = RngState(options.seed).fork(7);
  for (size_t i : split.train) {
    if (per_frame[i].size() < 2) continue;
    const size_t steps = per_frame[i].size() - 1;
    std::vector<size_t> frames = sample_frame_indices(steps, std::min(steps, options.bc_frames_per_clip), pick);
    for (size_t f : frames) {
      bc_x.push_back(per_frame[i][f]);
      bc_y.push_back(robot_demos[i].latent->positions[f + 1][0]);
      bc_y.push_back(robot_demos[i].latent->positions[f + 1][1]);
    }
  }
  std::vector<size_t> all_rows(bc_x.size());
  for (size_t r = 0; r < all_rows.size(); ++r) all_rows[r] = r;
  const Standardizer stdz = Standardizer::fit(bc_x, all_rows);
  const Tensor x = stdz.apply(bc_x, all_rows);
  const Tensor y({bc_x.size(), 2}, bc_y);
  const size_t d = x.dim(1), h = options.bc_hidden;
  RngState init = RngState(options.seed).fork(8);
  std::vector<Tensor> params{Tensor::randn({d, h}, init, 1.0 / std::sqrt(static_cast<double>(d)), true),
                             Tensor::zeros({h}, true),
                             Tensor::randn({h, 2}, init, 1.0 / std::sqrt(static_cast<double>(h)), true),
                             Tensor::full({2}, 0.5)};
  params[3].set_requires_grad(true);
  auto mlp = [&params](const Tensor& in) { return dense(relu(dense(in, params[0], params[1])), params[2], params[3]); };
  AdamState adam = AdamState::for_params(params, options.bc_learning_rate);
  for (size_t e = 0; e < options.bc_epochs; ++e) {
    const Tensor diff = sub(mlp(x), y);
    mean(mul(diff, diff)).backward();
    adam_step(params, adam);
    zero_grads(params);
  }

  double sq = 0.0;
  size_t count = 0, successes = 0;
  for (size_t i : split.test) {
    if (per_frame[i].size() < 2) continue;
    std::vector<size_t> rows(per_frame[i].size() - 1);
    for (size_t r = 0; r < rows.size(); ++r) rows[r] = r;
    const Tensor pred = mlp(stdz.apply(per_frame[i], rows));
    bool inside = true;
    for (size_t f = 0; f < rows.size(); ++f) {
      const auto& target = robot_demos[i].latent->positions[f + 1];
      const double dx = pred.data()[2 * f] - target[0], dy = pred.data()[2 * f + 1] - target[1];
      sq += dx * dx + dy * dy;
      count += 2;
      if (std::sqrt(dx * dx + dy * dy) > options.success_radius) inside = false;
    }
    successes += inside;
  }
  if (bc_x.empty() || count == 0) throw ArgumentError("behavior cloning needs clips of at least 2 frames");
  report.bc_action_error = sq / static_cast<double>(count);
  report.success_rate = static_cast<double>(successes) / static_cast<double>(split.test.size());
  return report;
}

std::vector<EmbeddingRow> embedding_rows(const EvalModel& model, const std::vector<PairedDemo>& demos) {
  const bool hr = checkpoint_of(model).config.method == Method::kHrAlign;
  std::vector<EmbeddingRow> rows;
  for (const auto& p : demos) {
    for (const VideoClip* clip : {&p.human, &p.robot}) {
      EmbeddingRow r;
      r.clip_id = 2 * clip->pair_id + (clip->domain == Domain::kRobot ? 1 : 0);
      r.task_id = clip->task_id;
      r.domain = clip->domain;
      r.adapted = model.adapted && !(hr && clip->domain == Domain::kHuman);
      r.values = to_vec(clip_embedding(model, *clip, p.description));
      rows.push_back(std::move(r));
    }
  }
  return rows;
}

std::string embeddings_csv(const std::vector<EmbeddingRow>& rows, size_t width) {
  std::string out = "clip_id,task_id,domain,adapted";
  for (size_t j = 0; j < width; ++j) out += ",f" + std::to_string(j);
  out += "\n";
  char buf[32];
  for (const auto& r : rows) {
    if (r.values.size() != width) throw DimensionError("embedding row width differs from the header");
    out += std::to_string(r.clip_id) + "," + std::to_string(r.task_id) + "," + std::string(domain_name(r.domain)) +
           "," + (r.adapted ? "1" : "0");
    for (double v : r.values) {
      std::snprintf(buf, sizeof(buf), ",%.17g", v);
      out += buf;
    }
    out += "\n";
  }
  return out;
}

void dump_embeddings(const EvalModel& model, const std::vector<PairedDemo>& demos,
                     const std::filesystem::path& path) {
  const ModelCheckpoint& ckpt = checkpoint_of(model);
  const size_t width = ckpt.backbone.channels_at(ckpt.backbone.num_blocks());
  const std::string text = embeddings_csv(embedding_rows(model, demos), width);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out.flush()) throw IoError("failed writing " + path.string());
}

double mean_within_task_distance(const std::vector<EmbeddingRow>& rows) {
  double total = 0.0;
  size_t pairs = 0;
  for (size_t a = 0; a < rows.size(); ++a) {
    for (size_t b = a + 1; b < rows.size(); ++b) {
      if (rows[a].task_id != rows[b].task_id) continue;
      double s = 0.0;
      for (size_t j = 0; j < rows[a].values.size(); ++j) {
        const double d = rows[a].values[j] - rows[b].values[j];
        s += d * d;
      }
      total += std::sqrt(s);
      ++pairs;
    }
  }
  if (pairs == 0) throw ArgumentError("no two rows share a task id");
  return total / static_cast<double>(pairs);
}

}  // namespace hralign
