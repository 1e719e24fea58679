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

#include "hralign/adapter.h"

#include <algorithm>
#include <cmath>

#include "hralign/errors.h"

namespace hralign {

AdapterBlock AdapterBlock::create(size_t channels, size_t ratio, RngState& rng) {
  if (channels == 0) throw ArgumentError("AdapterBlock: channels must be positive");
  if (ratio == 0) throw ArgumentError("AdapterBlock: bottleneck ratio must be positive");
  const size_t hidden = std::max<size_t>(1, channels / ratio);
  AdapterBlock b;
  b.ratio = ratio;
  b.down_weight = Tensor::randn({hidden, channels, 1, 1}, rng, 1.0 / std::sqrt(static_cast<double>(channels)), true);
  b.down_bias = Tensor::zeros({hidden}, true);
  b.up_weight = Tensor::zeros({channels, hidden, 1, 1}, true);
  b.up_bias = Tensor::zeros({channels}, true);
  return b;
}

size_t AdapterBlock::parameter_count() const {
  return down_weight.size() + down_bias.size() + up_weight.size() + up_bias.size();
}

AdapterBlock AdapterBlock::clone() const {
  return {down_weight.clone(), down_bias.clone(), up_weight.clone(), up_bias.clone(), ratio};
}

Tensor adapter_forward(const AdapterBlock& block, const Tensor& x) {
  const size_t channel_axis = x.rank() == 4 ? 1 : 0;
  if ((x.rank() != 3 && x.rank() != 4) || x.dim(channel_axis) != block.channels()) {
    throw DimensionError("adapter_forward: input " + shape_str(x.shape()) + " does not have " +
                         std::to_string(block.channels()) + " channels");
  }
  const Tensor hidden = relu(conv2d(x, block.down_weight, block.down_bias, 1, 0));
  return add(x, conv2d(hidden, block.up_weight, block.up_bias, 1, 0));
}

char position_letter(Position p) {
  switch (p) {
    case Position::kEarly: return 'E';
    case Position::kMiddle: return 'M';
    case Position::kLate: return 'L';
  }
  return '?';
}

std::vector<size_t> boundaries_for(Position p, size_t num_blocks) {
  switch (p) {
    case Position::kEarly: return {0};
    case Position::kLate: return {num_blocks};
    case Position::kMiddle: {
      std::vector<size_t> out;
      for (size_t b = 1; b < num_blocks; ++b) out.push_back(b);
      return out;
    }
  }
  return {};
}

std::string canonical_positions(std::string_view positions) {
  if (positions == "none" || positions.empty()) return "none";
  std::string out;
  for (char want : {'E', 'M', 'L'}) {
    const auto n = std::count(positions.begin(), positions.end(), want);
    if (n > 1) throw ArgumentError("adapter positions '" + std::string(positions) + "' repeat " + want);
    if (n == 1) out.push_back(want);
  }
  if (out.size() != positions.size()) {
    throw ArgumentError("adapter positions '" + std::string(positions) + "' must use only E, M, L or 'none'");
  }
  if (out != "E" && out != "M" && out != "L" && out != "EML") {
    throw ArgumentError("adapter positions must be one of none, E, M, L, EML; got '" + std::string(positions) + "'");
  }
  return out;
}

AdapterStack AdapterStack::create(const Backbone& backbone, std::string_view positions, size_t ratio,
                                  RngState& rng) {
  AdapterStack s;
  s.positions_ = canonical_positions(positions);
  if (s.positions_ == "none") return s;
  for (char c : s.positions_) {
    const Position p = c == 'E' ? Position::kEarly : c == 'M' ? Position::kMiddle : Position::kLate;
    const auto bounds = boundaries_for(p, backbone.num_blocks());
    if (bounds.empty()) {
      throw ArgumentError(std::string("adapter position ") + c + " needs at least two backbone blocks");
    }
    for (size_t b : bounds) {
      s.insertions_.push_back({p, b, AdapterBlock::create(backbone.channels_at(b), ratio, rng)});
    }
  }
  std::sort(s.insertions_.begin(), s.insertions_.end(),
            [](const AdapterInsertion& a, const AdapterInsertion& b) { return a.boundary < b.boundary; });
  return s;
}

AdapterStack AdapterStack::from_insertions(std::string_view positions, std::vector<AdapterInsertion> insertions) {
  AdapterStack s;
  s.positions_ = canonical_positions(positions);
  s.insertions_ = std::move(insertions);
  std::sort(s.insertions_.begin(), s.insertions_.end(),
            [](const AdapterInsertion& a, const AdapterInsertion& b) { return a.boundary < b.boundary; });
  for (size_t i = 1; i < s.insertions_.size(); ++i) {
    if (s.insertions_[i].boundary == s.insertions_[i - 1].boundary) {
      throw ArgumentError("adapter stack holds two blocks at boundary " + std::to_string(s.insertions_[i].boundary));
    }
  }
  return s;
}

const AdapterBlock* AdapterStack::at_boundary(size_t boundary) const {
  for (const auto& ins : insertions_) {
    if (ins.boundary == boundary) return &ins.block;
  }
  return nullptr;
}

size_t AdapterStack::first_boundary(size_t num_blocks) const {
  return insertions_.empty() ? num_blocks + 1 : insertions_.front().boundary;
}

std::vector<Tensor> AdapterStack::parameters() const {
  std::vector<Tensor> out;
  for (const auto& ins : insertions_) {
    for (const auto& t : ins.block.parameters()) out.push_back(t);
  }
  return out;
}

size_t AdapterStack::parameter_count() const {
  size_t n = 0;
  for (const auto& ins : insertions_) n += ins.block.parameter_count();
  return n;
}

void AdapterStack::set_trainable(bool trainable) {
  for (auto& ins : insertions_) {
    for (Tensor* t : {&ins.block.down_weight, &ins.block.down_bias, &ins.block.up_weight, &ins.block.up_bias}) {
      t->set_requires_grad(trainable);
    }
  }
}

AdapterStack AdapterStack::clone() const {
  AdapterStack s;
  s.positions_ = positions_;
  for (const auto& ins : insertions_) s.insertions_.push_back({ins.position, ins.boundary, ins.block.clone()});
  return s;
}

Tensor run_adapted(const Backbone& backbone, const AdapterStack& stack, const Tensor& activation,
                   size_t boundary) {
  Tensor x = activation;
  for (size_t b = boundary; b <= backbone.num_blocks(); ++b) {
    if (const AdapterBlock* blk = stack.at_boundary(b)) x = adapter_forward(*blk, x);
    if (b < backbone.num_blocks()) x = backbone.run_blocks(x, b, b + 1);
  }
  return x;
}

FeatureMap encode_adapted(const Backbone& backbone, const AdapterStack& stack, const Tensor& frames,
                          Domain domain) {
  if (!backbone.frozen()) throw ArgumentError("encode_adapted: backbone is not frozen");
  if (frames.rank() != 4 || frames.dim(3) != backbone.channels_at(0)) {
    throw DimensionError("encode_adapted: frames " + shape_str(frames.shape()) + " do not have " +
                         std::to_string(backbone.channels_at(0)) + " channels");
  }
  for (const auto& ins : stack.insertions()) {
    if (ins.boundary > backbone.num_blocks() || ins.block.channels() != backbone.channels_at(ins.boundary)) {
      throw ArgumentError("encode_adapted: adapter at boundary " + std::to_string(ins.boundary) +
                          " does not fit the backbone");
    }
  }
  const Tensor out = run_adapted(backbone, stack, frames_to_nchw(frames), 0);
  return {nchw_to_frames(out), domain, true};
}

double learnable_ratio(double learnable, double backbone) {
  if (!(backbone > 0.0)) throw ArgumentError("learnable_ratio: backbone size must be positive");
  return learnable / backbone;
}

double LearnableCount::ratio() const {
  return learnable_ratio(static_cast<double>(learnable()), static_cast<double>(backbone));
}

LearnableCount count_learnable(const AdapterStack& stack, const QueryEmbedder* projection,
                               const Backbone& backbone) {
  LearnableCount c;
  c.adapter = stack.parameter_count();
  c.projection = projection ? projection->parameter_count() : 0;
  c.backbone = backbone.parameter_count();
  return c;
}

}  // namespace hralign
