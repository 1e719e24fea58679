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

#include "hralign/encoder.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "hralign/errors.h"

namespace hralign {

Backbone Backbone::create(RngState& rng, const BackboneSpec& spec) {
  if (spec.widths.empty() || spec.widths.size() != spec.strides.size()) {
    throw ArgumentError("BackboneSpec: widths and strides must be non-empty and equal length");
  }
  Backbone b;
  size_t in = spec.in_channels;
  for (size_t i = 0; i < spec.widths.size(); ++i) {
    const size_t out = spec.widths[i];
    const double fan_in = static_cast<double>(in * spec.kernel * spec.kernel);
    ConvBlock blk;
    blk.weight = Tensor::randn({out, in, spec.kernel, spec.kernel}, rng, std::sqrt(2.0 / fan_in));
    blk.bias = Tensor::zeros({out});
    blk.stride = spec.strides[i];
    blk.padding = static_cast<int>(spec.kernel / 2);
    b.blocks_.push_back(std::move(blk));
    in = out;
  }
  b.frozen_ = true;
  return b;
}

Backbone Backbone::from_blocks(std::vector<ConvBlock> blocks, bool frozen) {
  if (blocks.empty()) throw ArgumentError("Backbone: needs at least one block");
  for (size_t i = 1; i < blocks.size(); ++i) {
    if (blocks[i].weight.dim(1) != blocks[i - 1].weight.dim(0)) {
      throw DimensionError("Backbone: block " + std::to_string(i) + " input channels do not chain");
    }
  }
  Backbone b;
  b.blocks_ = std::move(blocks);
  b.set_frozen(frozen);
  return b;
}

size_t Backbone::channels_at(size_t boundary) const {
  if (boundary > blocks_.size()) throw ArgumentError("boundary " + std::to_string(boundary) + " out of range");
  return boundary == 0 ? blocks_.front().weight.dim(1) : blocks_[boundary - 1].weight.dim(0);
}

void Backbone::set_frozen(bool frozen) {
  frozen_ = frozen;
  for (auto& blk : blocks_) {
    blk.weight.set_requires_grad(!frozen);
    blk.bias.set_requires_grad(!frozen);
  }
}

Tensor Backbone::run_blocks(const Tensor& activation, size_t first, size_t last) const {
  if (first > last || last > blocks_.size()) throw ArgumentError("run_blocks: invalid block range");
  Tensor x = activation;
  for (size_t i = first; i < last; ++i) {
    const ConvBlock& blk = blocks_[i];
    x = relu(conv2d(x, blk.weight, blk.bias, blk.stride, blk.padding));
  }
  return x;
}

std::vector<Tensor> Backbone::parameters() const {
  std::vector<Tensor> out;
  for (const auto& blk : blocks_) {
    out.push_back(blk.weight);
    out.push_back(blk.bias);
  }
  return out;
}

size_t Backbone::parameter_count() const {
  size_t n = 0;
  for (const auto& blk : blocks_) n += blk.weight.size() + blk.bias.size();
  return n;
}

Backbone Backbone::clone() const {
  Backbone b;
  b.frozen_ = frozen_;
  for (const auto& blk : blocks_) {
    b.blocks_.push_back({blk.weight.clone(), blk.bias.clone(), blk.stride, blk.padding});
  }
  return b;
}

Tensor frames_to_nchw(const Tensor& frames) {
  if (frames.rank() != 4) throw DimensionError("expected T×H×W×C frames, got " + shape_str(frames.shape()));
  return permute(frames, {0, 3, 1, 2});
}

Tensor nchw_to_frames(const Tensor& activation) {
  if (activation.rank() != 4) {
    throw DimensionError("expected N×C×H×W activation, got " + shape_str(activation.shape()));
  }
  return permute(activation, {0, 2, 3, 1});
}

FeatureMap encode_frozen(const Backbone& backbone, const Tensor& frames, Domain domain) {
  if (!backbone.frozen()) throw ArgumentError("encode_frozen: backbone is not frozen");
  if (frames.rank() != 4 || frames.dim(3) != backbone.channels_at(0)) {
    throw DimensionError("encode_frozen: frames " + shape_str(frames.shape()) + " do not have " +
                         std::to_string(backbone.channels_at(0)) + " channels");
  }
  const Tensor out = backbone.run_blocks(frames_to_nchw(frames), 0, backbone.num_blocks());
  return {nchw_to_frames(out).detach(), domain, false};
}

namespace {

size_t pick_positive(size_t len, size_t anchor, RngState& rng) {
  if (len == 1) return 0;
  std::vector<size_t> near;
  for (size_t d = 1; d <= 2; ++d) {
    if (anchor >= d) near.push_back(anchor - d);
    if (anchor + d < len) near.push_back(anchor + d);
  }
  std::sort(near.begin(), near.end());
  return near[rng.uniform_int(near.size())];
}

size_t pick_negative(size_t len, size_t anchor, RngState& rng) {
  const size_t min_gap = std::max<size_t>(1, len / 2);
  std::vector<size_t> far;
  for (size_t i = 0; i < len; ++i) {
    const size_t d = i > anchor ? i - anchor : anchor - i;
    if (d >= min_gap) far.push_back(i);
  }
  if (far.empty()) return anchor == 0 ? len - 1 : 0;
  return far[rng.uniform_int(far.size())];
}

}  // namespace

Tensor time_contrastive_loss(const FrameEncoder& encode, std::span<const VideoClip* const> clips,
                             RngState& rng, double temperature, PretextBatchStats* stats) {
  if (clips.empty()) throw ArgumentError("time_contrastive_loss: empty batch");
  if (!(temperature > 0.0)) throw ArgumentError("time_contrastive_loss: temperature must be positive");
  const size_t b = clips.size();
  std::vector<Tensor> anchors, positives, negatives;
  for (const VideoClip* clip : clips) {
    const size_t len = clip->length();
    const size_t a = rng.uniform_int(len);
    const size_t p = pick_positive(len, a, rng);
    const size_t n = pick_negative(len, a, rng);
    const size_t ids[3] = {a, p, n};
    const Tensor picked = index_select(clip->frames, ids);
    anchors.push_back(index_select(picked, std::vector<size_t>{0}));
    positives.push_back(index_select(picked, std::vector<size_t>{1}));
    negatives.push_back(index_select(picked, std::vector<size_t>{2}));
  }
  auto join = [](const std::vector<Tensor>& parts) {
    Tensor out = parts[0];
    for (size_t i = 1; i < parts.size(); ++i) out = concat(out, parts[i], 0);
    return out;
  };
  const Tensor frames = concat(concat(join(anchors), join(positives), 0), join(negatives), 0);
  const Tensor fmap = encode(frames_to_nchw(frames));  // 3b × C × h × w
  const size_t c = fmap.dim(1), hw = fmap.dim(2) * fmap.dim(3);
  const Tensor pooled = scale(sum(reshape(fmap, {3 * b, c, hw}), 2), 1.0 / static_cast<double>(hw));
  const Tensor z = l2_normalize(pooled, 1);

  std::vector<size_t> ia(b), ip(b), in(b);
  for (size_t i = 0; i < b; ++i) {
    ia[i] = i;
    ip[i] = b + i;
    in[i] = 2 * b + i;
  }
  const Tensor za = index_select(z, ia), zp = index_select(z, ip), zn = index_select(z, in);
  const Tensor logits = scale(matmul(za, transpose(zp)), 1.0 / temperature);        // b × b
  const Tensor far = scale(sum(mul(za, zn), 1), 1.0 / temperature);                 // b
  const Tensor all = concat(logits, reshape(far, {b, 1}), 1);                        // b × (b+1)
  const Tensor loss = mean(sub(logsumexp(all, 1), diagonal(logits)));

  if (stats) {
    double pos = 0.0, hard = 0.0;
    auto lv = logits.data();
    auto fv = far.data();
    for (size_t i = 0; i < b; ++i) {
      pos += lv[i * b + i] * temperature;
      double worst = fv[i] * temperature;
      for (size_t j = 0; j < b; ++j) {
        if (j != i) worst = std::max(worst, lv[i * b + j] * temperature);
      }
      hard += worst;
    }
    stats->positive_similarity = pos / static_cast<double>(b);
    stats->hardest_negative_similarity = hard / static_cast<double>(b);
  }
  return loss;
}

PretrainResult pretext_pretrain(RngState& rng, std::span<const VideoClip> human_clips, int epochs,
                                const PretextOptions& options) {
  if (human_clips.empty()) throw ArgumentError("pretext_pretrain: no clips");
  if (epochs < 0) throw ArgumentError("pretext_pretrain: epochs must be non-negative");
  for (const auto& clip : human_clips) {
    if (clip.domain != Domain::kHuman) {
      throw ArgumentError("pretext_pretrain: clip of pair " + std::to_string(clip.pair_id) + " is not human");
    }
  }
  PretrainResult result;
  result.backbone = Backbone::create(rng);
  result.backbone.set_frozen(false);
  std::vector<Tensor> params = result.backbone.parameters();
  AdamState adam = AdamState::for_params(params, options.learning_rate);
  const Backbone& net = result.backbone;
  const FrameEncoder encode = [&net](const Tensor& x) { return net.run_blocks(x, 0, net.num_blocks()); };

  const size_t batch = std::min(options.batch_size, human_clips.size());
  for (int epoch = 0; epoch < epochs; ++epoch) {
    const auto order = shuffled_indices(human_clips.size(), rng);
    double total = 0.0;
    size_t batches = 0;
    for (size_t start = 0; start + batch <= order.size(); start += batch) {
      std::vector<const VideoClip*> group;
      for (size_t k = start; k < start + batch; ++k) group.push_back(&human_clips[order[k]]);
      const Tensor loss = time_contrastive_loss(encode, group, rng, options.temperature);
      loss.backward();
      adam_step(params, adam);
      zero_grads(params);
      total += loss.item();
      ++batches;
    }
    result.epoch_losses.push_back(total / static_cast<double>(batches));
  }
  result.backbone.set_frozen(true);
  return result;
}

}  // namespace hralign
