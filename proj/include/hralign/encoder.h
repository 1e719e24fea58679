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

// Per-frame convolutional video encoder and its time-contrastive pretext
// pre-training.

#ifndef HRALIGN_ENCODER_H_
#define HRALIGN_ENCODER_H_

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "hralign/dataset.h"
#include "hralign/optim.h"
#include "hralign/rng.h"
#include "hralign/tensor.h"

namespace hralign {

struct ConvBlock {
  Tensor weight;  // out × in × k × k
  Tensor bias;    // out
  int stride = 1;
  int padding = 1;
};

struct BackboneSpec {
  size_t in_channels = kFrameChannels;
  std::vector<size_t> widths{16, 32, 32};
  std::vector<int> strides{2, 2, 1};
  size_t kernel = 3;
};

// Ordered conv+ReLU blocks. Boundary b is the activation entering block b;
// boundary num_blocks() is the final output.
class Backbone {
 public:
  Backbone() = default;
  // He-normal weights, zero biases. Created frozen.
  static Backbone create(RngState& rng, const BackboneSpec& spec = {});
  static Backbone from_blocks(std::vector<ConvBlock> blocks, bool frozen);

  size_t num_blocks() const { return blocks_.size(); }
  const ConvBlock& block(size_t i) const { return blocks_.at(i); }
  ConvBlock& block(size_t i) { return blocks_.at(i); }
  size_t channels_at(size_t boundary) const;

  bool frozen() const { return frozen_; }
  // Frozen weights carry requires_grad = false.
  void set_frozen(bool frozen);

  // Applies blocks [first, last) to an N×C×H×W activation.
  Tensor run_blocks(const Tensor& activation, size_t first, size_t last) const;

  std::vector<Tensor> parameters() const;
  size_t parameter_count() const;
  // Deep copy with independent weights.
  Backbone clone() const;

 private:
  std::vector<ConvBlock> blocks_;
  bool frozen_ = true;
};

struct FeatureMap {
  Tensor values;  // T̂ × Ĥ × Ŵ × Ĉ
  Domain domain = Domain::kHuman;
  bool adapted = false;
};

// T×H×W×C <-> T×C×H×W.
Tensor frames_to_nchw(const Tensor& frames);
Tensor nchw_to_frames(const Tensor& activation);

FeatureMap encode_frozen(const Backbone& backbone, const Tensor& frames, Domain domain = Domain::kHuman);

// Maps an N×C×H×W frame batch to N×C'×H'×W' features.
using FrameEncoder = std::function<Tensor(const Tensor&)>;

struct PretextBatchStats {
  double positive_similarity = 0.0;
  double hardest_negative_similarity = 0.0;
};

// Time-contrastive InfoNCE over a batch of clips: each clip contributes an
// anchor frame, a temporally close positive and a temporally far negative.
// Spatially mean-pooled, L2-normalized features; the other clips' positives
// act as in-batch negatives.
Tensor time_contrastive_loss(const FrameEncoder& encode, std::span<const VideoClip* const> clips,
                             RngState& rng, double temperature, PretextBatchStats* stats = nullptr);

struct PretextOptions {
  size_t batch_size = 16;
  double learning_rate = 3e-4;
  double temperature = 0.1;
};

struct PretrainResult {
  Backbone backbone;
  std::vector<double> epoch_losses;  // mean training loss per epoch
};

PretrainResult pretext_pretrain(RngState& rng, std::span<const VideoClip> human_clips, int epochs,
                                const PretextOptions& options = {});

}  // namespace hralign

#endif  // HRALIGN_ENCODER_H_
