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

#include "hralign/trainer.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>

#include "hralign/adapter.h"
#include "hralign/alignment.h"
#include "hralign/errors.h"
#include "hralign/task_query.h"

namespace hralign {

namespace {

constexpr uint64_t kInitStream = 1;
constexpr uint64_t kFrameStream = 2;
constexpr uint64_t kEpochStreamBase = 1000;

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

// Pulls batches from consecutive epoch shuffles; a batch never straddles two
// epochs, the tail of an epoch that cannot fill a batch is skipped.
class EpochSampler {
 public:
  EpochSampler(uint64_t seed, size_t n, size_t batch, uint64_t epoch, uint64_t cursor)
      : seed_(seed), n_(n), batch_(batch), epoch_(epoch), cursor_(cursor) {
    if (batch_ == 0) throw ArgumentError("batch size must be positive");
    if (batch_ > n_) {
      throw ArgumentError("batch size " + std::to_string(batch_) + " exceeds the " + std::to_string(n_) +
                          " available training items");
    }
    order_ = epoch_order(seed_, epoch_, n_);
  }

  std::vector<size_t> next() {
    if (cursor_ + batch_ > n_) {
      ++epoch_;
      cursor_ = 0;
      order_ = epoch_order(seed_, epoch_, n_);
    }
    std::vector<size_t> out(order_.begin() + static_cast<std::ptrdiff_t>(cursor_),
                            order_.begin() + static_cast<std::ptrdiff_t>(cursor_ + batch_));
    cursor_ += batch_;
    return out;
  }

  uint64_t epoch() const { return epoch_; }
  uint64_t cursor() const { return cursor_; }

 private:
  uint64_t seed_;
  size_t n_;
  size_t batch_;
  uint64_t epoch_;
  uint64_t cursor_;
  std::vector<size_t> order_;
};

ModelCheckpoint start_state(const TrainConfig& config, const Backbone& backbone, const ModelCheckpoint* resume,
                            size_t num_classes) {
  config.validate();
  if (!resume) return initial_checkpoint(config, backbone, num_classes);
  if (resume->config_hash != config.trajectory_hash()) {
    throw ArgumentError("resume checkpoint was produced by a different configuration");
  }
  if (resume->step > config.steps) {
    throw ArgumentError("resume checkpoint is at step " + std::to_string(resume->step) +
                        ", beyond the requested " + std::to_string(config.steps));
  }
  ModelCheckpoint ckpt = resume->clone();
  ckpt.config = config;
  return ckpt;
}

void set_learnable(const std::vector<Tensor>& params, bool on) {
  for (Tensor t : params) t.set_requires_grad(on);
}

void finish_params(ModelCheckpoint& ckpt) {
  // Stored checkpoints carry plain values.
  ckpt.backbone.set_frozen(true);
  ckpt.adapters.set_trainable(false);
  if (ckpt.query) ckpt.query->set_trainable(false);
  if (ckpt.head) set_learnable(ckpt.head->parameters(), false);
}

Tensor stack_rows(const std::vector<Tensor>& rows) { return stack(rows); }

std::vector<const VideoClip*> training_clips(const TrainConfig& config, const std::vector<PairedDemo>& data) {
  std::vector<const VideoClip*> clips;
  for (const auto& p : data) clips.push_back(&p.robot);
  if (config.baseline_data == "full") {
    for (const auto& p : data) clips.push_back(&p.human);
  }
  return clips;
}

// Encoder used by the baselines: the trainable backbone copy, optionally
// routed through trainable adapters.
Tensor baseline_encode(const ModelCheckpoint& ckpt, const Tensor& nchw) {
  if (ckpt.adapters.empty()) return ckpt.backbone.run_blocks(nchw, 0, ckpt.backbone.num_blocks());
  return run_adapted(ckpt.backbone, ckpt.adapters, nchw, 0);
}

void check_data(const std::vector<PairedDemo>& data) {
  if (data.empty()) throw ArgumentError("training set is empty");
}

}  // namespace

std::vector<size_t> epoch_order(uint64_t seed, uint64_t epoch, size_t n) {
  RngState rng = RngState(seed).fork(kEpochStreamBase + epoch);
  return shuffled_indices(n, rng);
}

std::vector<int> task_classes(const std::vector<PairedDemo>& data) {
  std::vector<int> ids;
  for (const auto& p : data) ids.push_back(p.description.task_id);
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

ModelCheckpoint initial_checkpoint(const TrainConfig& config, const Backbone& backbone, size_t num_classes) {
  if (!backbone.frozen()) throw ArgumentError("training requires a frozen backbone");
  const RngState root(config.seed);
  RngState init = root.fork(kInitStream);
  ModelCheckpoint ckpt;
  ckpt.config = config;
  ckpt.config_hash = config.trajectory_hash();
  ckpt.backbone = backbone.clone();
  ckpt.rng = root.fork(kFrameStream);
  const size_t width = backbone.channels_at(backbone.num_blocks());
  std::vector<Tensor> learnable;
  if (config.method == Method::kHrAlign) {
    ckpt.adapters = AdapterStack::create(ckpt.backbone, config.adapter_positions, config.bottleneck_ratio, init);
    ckpt.query = QueryEmbedder(width, init);
  } else {
    if (config.baseline_learnable == "adapter") {
      ckpt.adapters = AdapterStack::create(ckpt.backbone, config.adapter_positions, config.bottleneck_ratio, init);
    }
    if (config.method == Method::kClsBaseline) {
      if (num_classes < 2) throw ArgumentError("classification baseline needs at least 2 task classes");
      ckpt.head = ClassifierHead::create(num_classes, width, init);
    }
  }
  ckpt.optimizer = AdamState::for_params(ckpt.learnable_parameters(), config.learning_rate);
  finish_params(ckpt);
  return ckpt;
}

TrainResult train_hr_align(const TrainConfig& config, const std::vector<PairedDemo>& data,
                           const Backbone& backbone, const ModelCheckpoint* resume, const StepHook& hook) {
  if (config.method != Method::kHrAlign) throw ArgumentError("train_hr_align: config.method is not hr_align");
  if (!backbone.frozen()) throw ArgumentError("train_hr_align: backbone must be frozen");
  check_data(data);
  TrainResult result;
  result.checkpoint = start_state(config, backbone, resume, 0);
  ModelCheckpoint& ckpt = result.checkpoint;
  EpochSampler sampler(config.seed, data.size(), config.batch_size, ckpt.epoch, ckpt.cursor);

  const Backbone& net = ckpt.backbone;
  const size_t nblocks = net.num_blocks();
  const size_t first = std::min(ckpt.adapters.first_boundary(nblocks), nblocks);

  // Frozen features never change, so every clip is encoded once up front;
  // robot clips also keep the activation at the first adapter boundary.
  std::vector<Tensor> human_feats, robot_feats, robot_entry;
  for (const auto& p : data) {
    human_feats.push_back(encode_frozen(net, p.human.frames, Domain::kHuman).values);
    const Tensor entry = net.run_blocks(frames_to_nchw(p.robot.frames), 0, first).detach();
    robot_feats.push_back(nchw_to_frames(net.run_blocks(entry, first, nblocks)).detach());
    robot_entry.push_back(entry);
  }

  ckpt.adapters.set_trainable(true);
  if (config.use_language) ckpt.query->set_trainable(true);
  std::vector<Tensor> params = ckpt.learnable_parameters();

  while (ckpt.step < config.steps) {
    const auto t0 = Clock::now();
    const std::vector<size_t> batch = sampler.next();
    std::vector<Tensor> h_rows, f_rows, t_rows;
    for (size_t idx : batch) {
      const PairedDemo& pair = data[idx];
      const std::vector<size_t> hi = sample_frame_indices(pair.human.length(), config.frames, ckpt.rng);
      const std::vector<size_t> ri = sample_frame_indices(pair.robot.length(), config.frames, ckpt.rng);
      const Tensor h_map = index_select(human_feats[idx], hi);
      const Tensor f_map = index_select(robot_feats[idx], ri);
      const Tensor t_map = nchw_to_frames(run_adapted(net, ckpt.adapters, index_select(robot_entry[idx], ri), first));
      if (config.use_language) {
        const Tensor q = embed_task(*ckpt.query, pair.description);
        const Tensor q_fixed = q.detach();
        h_rows.push_back(task_aware_pool(h_map, q_fixed, config.normalize, Stream::kHumanFrozen).vector);
        f_rows.push_back(task_aware_pool(f_map, q_fixed, config.normalize, Stream::kRobotFrozen).vector);
        t_rows.push_back(task_aware_pool(t_map, q, config.normalize, Stream::kRobotAdapted).vector);
      } else {
        h_rows.push_back(uniform_pool(h_map, config.normalize, Stream::kHumanFrozen).vector);
        f_rows.push_back(uniform_pool(f_map, config.normalize, Stream::kRobotFrozen).vector);
        t_rows.push_back(uniform_pool(t_map, config.normalize, Stream::kRobotAdapted).vector);
      }
    }
    AlignmentBatchFeatures feats{stack_rows(h_rows), stack_rows(f_rows), stack_rows(t_rows), config.temperature};
    const Tensor loss = hr_align_loss(feats);
    const AlignmentStats stats = alignment_stats(feats);
    loss.backward();
    adam_step(params, ckpt.optimizer);
    zero_grads(params);

    ++ckpt.step;
    ckpt.epoch = sampler.epoch();
    ckpt.cursor = sampler.cursor();
    MetricsRecord rec{ckpt.step, loss.item(), stats.positive_similarity, stats.hardest_negative_similarity,
                      elapsed_ms(t0)};
    result.metrics.records.push_back(rec);
    if (hook) hook(ckpt, rec);
  }
  finish_params(ckpt);
  return result;
}

TrainResult train_baseline_pret(const TrainConfig& config, const std::vector<PairedDemo>& data,
                                const Backbone& backbone, const ModelCheckpoint* resume, const StepHook& hook) {
  if (config.method != Method::kPretBaseline) {
    throw ArgumentError("train_baseline_pret: config.method is not pret_baseline");
  }
  check_data(data);
  TrainResult result;
  result.checkpoint = start_state(config, backbone, resume, 0);
  ModelCheckpoint& ckpt = result.checkpoint;
  const std::vector<const VideoClip*> clips = training_clips(config, data);
  EpochSampler sampler(config.seed, clips.size(), config.batch_size, ckpt.epoch, ckpt.cursor);

  if (config.baseline_learnable == "adapter") {
    ckpt.adapters.set_trainable(true);
  } else {
    ckpt.backbone.set_frozen(false);
  }
  std::vector<Tensor> params = ckpt.learnable_parameters();
  const FrameEncoder encode = [&ckpt](const Tensor& x) { return baseline_encode(ckpt, x); };

  while (ckpt.step < config.steps) {
    const auto t0 = Clock::now();
    std::vector<const VideoClip*> batch;
    for (size_t idx : sampler.next()) batch.push_back(clips[idx]);
    PretextBatchStats stats;
    const Tensor loss = time_contrastive_loss(encode, batch, ckpt.rng, config.temperature, &stats);
    loss.backward();
    adam_step(params, ckpt.optimizer);
    zero_grads(params);

    ++ckpt.step;
    ckpt.epoch = sampler.epoch();
    ckpt.cursor = sampler.cursor();
    MetricsRecord rec{ckpt.step, loss.item(), stats.positive_similarity, stats.hardest_negative_similarity,
                      elapsed_ms(t0)};
    result.metrics.records.push_back(rec);
    if (hook) hook(ckpt, rec);
  }
  finish_params(ckpt);
  return result;
}

namespace {

// Mean over frames and positions of the encoded map: B×C.
Tensor pooled_clip_features(const ModelCheckpoint& ckpt, const std::vector<Tensor>& frame_sets) {
  std::vector<Tensor> rows;
  for (const Tensor& frames : frame_sets) {
    const Tensor fmap = nchw_to_frames(baseline_encode(ckpt, frames_to_nchw(frames)));
    const size_t c = fmap.dim(3);
    rows.push_back(scale(sum(reshape(fmap, {fmap.size() / c, c}), 0), c / static_cast<double>(fmap.size())));
  }
  return stack(rows);
}

Tensor head_logits(const ClassifierHead& head, const Tensor& z) {
  return add_bias(matmul(z, transpose(head.weight)), head.bias, 1);
}

}  // namespace

TrainResult train_baseline_cls(const TrainConfig& config, const std::vector<PairedDemo>& data,
                               const Backbone& backbone, const ModelCheckpoint* resume, const StepHook& hook) {
  if (config.method != Method::kClsBaseline) {
    throw ArgumentError("train_baseline_cls: config.method is not cls_baseline");
  }
  check_data(data);
  const std::vector<int> classes = task_classes(data);
  if (classes.size() < 2) throw ArgumentError("classification baseline needs at least 2 task classes");
  TrainResult result;
  result.checkpoint = start_state(config, backbone, resume, classes.size());
  ModelCheckpoint& ckpt = result.checkpoint;
  if (!ckpt.head || ckpt.head->weight.dim(0) != classes.size()) {
    throw ArgumentError("resume checkpoint head does not match the task classes");
  }
  const std::vector<const VideoClip*> clips = training_clips(config, data);
  auto label_of = [&classes](const VideoClip& c) {
    return static_cast<size_t>(std::lower_bound(classes.begin(), classes.end(), c.task_id) - classes.begin());
  };
  EpochSampler sampler(config.seed, clips.size(), config.batch_size, ckpt.epoch, ckpt.cursor);

  if (config.baseline_learnable == "adapter") {
    ckpt.adapters.set_trainable(true);
  } else {
    ckpt.backbone.set_frozen(false);
  }
  set_learnable(ckpt.head->parameters(), true);
  std::vector<Tensor> params = ckpt.learnable_parameters();

  while (ckpt.step < config.steps) {
    const auto t0 = Clock::now();
    std::vector<Tensor> frame_sets;
    std::vector<size_t> labels;
    for (size_t idx : sampler.next()) {
      frame_sets.push_back(sample_frames(*clips[idx], config.frames, ckpt.rng));
      labels.push_back(label_of(*clips[idx]));
    }
    const Tensor logits = head_logits(*ckpt.head, pooled_clip_features(ckpt, frame_sets));
    const Tensor loss = cross_entropy(logits, labels);
    const Tensor probs = softmax(logits, 1);
    double true_p = 0.0, worst = 0.0;
    const size_t k = classes.size();
    for (size_t i = 0; i < labels.size(); ++i) {
      auto row = probs.data().subspan(i * k, k);
      true_p += row[labels[i]];
      double w = 0.0;
      for (size_t j = 0; j < k; ++j) {
        if (j != labels[i]) w = std::max(w, row[j]);
      }
      worst += w;
    }
    loss.backward();
    adam_step(params, ckpt.optimizer);
    zero_grads(params);

    ++ckpt.step;
    ckpt.epoch = sampler.epoch();
    ckpt.cursor = sampler.cursor();
    const double b = static_cast<double>(labels.size());
    MetricsRecord rec{ckpt.step, loss.item(), true_p / b, worst / b, elapsed_ms(t0)};
    result.metrics.records.push_back(rec);
    if (hook) hook(ckpt, rec);
  }
  finish_params(ckpt);

  size_t correct = 0;
  for (const VideoClip* clip : clips) {
    const Tensor logits = head_logits(*ckpt.head, pooled_clip_features(ckpt, {clip->frames}));
    auto row = logits.data();
    const size_t best = static_cast<size_t>(std::max_element(row.begin(), row.end()) - row.begin());
    if (best == label_of(*clip)) ++correct;
  }
  result.final_accuracy = static_cast<double>(correct) / static_cast<double>(clips.size());
  return result;
}

TrainResult train(const TrainConfig& config, const std::vector<PairedDemo>& data, const Backbone& backbone,
                  const ModelCheckpoint* resume, const StepHook& hook) {
  switch (config.method) {
    case Method::kHrAlign:
      return train_hr_align(config, data, backbone, resume, hook);
    case Method::kPretBaseline:
      return train_baseline_pret(config, data, backbone, resume, hook);
    case Method::kClsBaseline:
      return train_baseline_cls(config, data, backbone, resume, hook);
  }
  throw ArgumentError("unknown training method");
}

}  // namespace hralign
