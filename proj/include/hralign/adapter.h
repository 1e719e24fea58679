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

// Residual bottleneck adapters injected into a frozen backbone.

#ifndef HRALIGN_ADAPTER_H_
#define HRALIGN_ADAPTER_H_

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hralign/encoder.h"
#include "hralign/rng.h"
#include "hralign/task_query.h"
#include "hralign/tensor.h"

namespace hralign {

// x + up(relu(down(x))) with 1×1 convolutions.
struct AdapterBlock {
  Tensor down_weight;  // hidden × C × 1 × 1
  Tensor down_bias;    // hidden
  Tensor up_weight;    // C × hidden × 1 × 1
  Tensor up_bias;      // C
  size_t ratio = 4;

  // Small random down-projection, zero up-projection: starts as the identity.
  static AdapterBlock create(size_t channels, size_t ratio, RngState& rng);

  size_t channels() const { return up_bias.size(); }
  size_t hidden() const { return down_bias.size(); }
  std::vector<Tensor> parameters() const { return {down_weight, down_bias, up_weight, up_bias}; }
  size_t parameter_count() const;
  AdapterBlock clone() const;
};

// `x` is C×H×W or N×C×H×W.
Tensor adapter_forward(const AdapterBlock& block, const Tensor& x);

// E: before the first block. M: between every pair of consecutive blocks.
// L: after the last block.
enum class Position { kEarly, kMiddle, kLate };

char position_letter(Position p);
std::vector<size_t> boundaries_for(Position p, size_t num_blocks);

struct AdapterInsertion {
  Position position;
  size_t boundary;
  AdapterBlock block;
};

class AdapterStack {
 public:
  AdapterStack() = default;
  // `positions` is one of "none", "E", "M", "L", "EML".
  static AdapterStack create(const Backbone& backbone, std::string_view positions, size_t ratio,
                             RngState& rng);
  static AdapterStack from_insertions(std::string_view positions, std::vector<AdapterInsertion> insertions);

  bool empty() const { return insertions_.empty(); }
  const std::string& positions() const { return positions_; }
  const std::vector<AdapterInsertion>& insertions() const { return insertions_; }
  std::vector<AdapterInsertion>& insertions() { return insertions_; }
  const AdapterBlock* at_boundary(size_t boundary) const;
  // Smallest boundary holding an adapter; num_blocks + 1 when empty.
  size_t first_boundary(size_t num_blocks) const;

  std::vector<Tensor> parameters() const;
  size_t parameter_count() const;
  void set_trainable(bool trainable);
  AdapterStack clone() const;

 private:
  std::string positions_ = "none";
  std::vector<AdapterInsertion> insertions_;
};

// Validates a positions string and returns it in canonical form.
std::string canonical_positions(std::string_view positions);

// Runs the backbone from `boundary` to the end on an N×C×H×W activation,
// routing through every adapter at or after `boundary`.
Tensor run_adapted(const Backbone& backbone, const AdapterStack& stack, const Tensor& activation,
                   size_t boundary);

FeatureMap encode_adapted(const Backbone& backbone, const AdapterStack& stack, const Tensor& frames,
                          Domain domain = Domain::kRobot);

struct LearnableCount {
  size_t adapter = 0;
  size_t projection = 0;
  size_t backbone = 0;

  size_t learnable() const { return adapter + projection; }
  // learnable / frozen backbone parameters.
  double ratio() const;
};

LearnableCount count_learnable(const AdapterStack& stack, const QueryEmbedder* projection,
                               const Backbone& backbone);
double learnable_ratio(double learnable, double backbone);

}  // namespace hralign

#endif  // HRALIGN_ADAPTER_H_
