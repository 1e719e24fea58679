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

// Task-description query vectors: a frozen hashed bag-of-tokens featurizer
// followed by a learnable linear map to the visual channel width.

#ifndef HRALIGN_TASK_QUERY_H_
#define HRALIGN_TASK_QUERY_H_

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "hralign/rng.h"
#include "hralign/tensor.h"

namespace hralign {

struct TaskDescription {
  std::string text;
  int task_id = 0;
};

// 64-bit FNV-1a over the raw bytes.
uint64_t fnv1a64(std::string_view bytes);

// Lowercase, split on ASCII whitespace.
std::vector<std::string> tokenize(std::string_view text);

class QueryEmbedder {
 public:
  static constexpr size_t kTextWidth = 64;
  static constexpr size_t kBuckets = 1024;
  static constexpr uint64_t kTableSeed = 0x5EEDBA6C0FFEEULL;

  QueryEmbedder() = default;
  // Frozen table from kTableSeed; projection drawn from `rng`.
  QueryEmbedder(size_t feature_width, RngState& rng);
  // Rebuilds the frozen table around stored projection weights.
  static QueryEmbedder from_weights(Tensor projection, Tensor bias);

  size_t feature_width() const { return bias_.size(); }

  // Mean of the bucket vectors of the description's tokens. No gradient.
  Tensor text_features(const TaskDescription& desc) const;

  const Tensor& table() const { return table_; }
  const Tensor& projection() const { return projection_; }  // feature_width × kTextWidth
  const Tensor& bias() const { return bias_; }
  Tensor& projection() { return projection_; }
  Tensor& bias() { return bias_; }

  std::vector<Tensor> parameters() const { return {projection_, bias_}; }
  size_t parameter_count() const { return projection_.size() + bias_.size(); }
  void set_trainable(bool trainable);

  QueryEmbedder clone() const;

 private:
  Tensor table_;
  Tensor projection_;
  Tensor bias_;
};

// Query vector of shape {feature_width}.
Tensor embed_task(const QueryEmbedder& embedder, const TaskDescription& desc);

}  // namespace hralign

#endif  // HRALIGN_TASK_QUERY_H_
