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

// Task-aware attention pooling and the symmetric human-robot contrastive
// alignment loss.

#ifndef HRALIGN_ALIGNMENT_H_
#define HRALIGN_ALIGNMENT_H_

#include "hralign/encoder.h"
#include "hralign/tensor.h"

namespace hralign {

enum class Stream { kHumanFrozen, kRobotFrozen, kRobotAdapted };

struct PooledFeature {
  Tensor vector;   // Ĉ
  Tensor weights;  // attention over the T̂·Ĥ·Ŵ positions
  Stream stream = Stream::kHumanFrozen;
};

// Softmax attention over all positions of a T̂×Ĥ×Ŵ×Ĉ map with `query` as the
// key; output is the attention-weighted feature, optionally L2-normalized.
PooledFeature task_aware_pool(const Tensor& features, const Tensor& query, bool normalize,
                              Stream stream);
PooledFeature task_aware_pool(const FeatureMap& features, const Tensor& query, bool normalize);
// Uniform weights; used when the language query is disabled.
PooledFeature uniform_pool(const Tensor& features, bool normalize, Stream stream);

// exp(x·y / temperature).
double similarity(const Tensor& x, const Tensor& y, double temperature);
double log_similarity(const Tensor& x, const Tensor& y, double temperature);

struct AlignmentBatchFeatures {
  Tensor human_frozen;   // M × Ĉ
  Tensor robot_frozen;   // M × Ĉ
  Tensor robot_adapted;  // M × Ĉ
  double temperature = 0.1;
};

// Mean over the batch of the two −log terms (human→robot and robot→human),
// evaluated in log space. Human-frozen and robot-frozen inputs are detached;
// only robot_adapted receives gradient.
Tensor hr_align_loss(const AlignmentBatchFeatures& batch);

struct AlignmentStats {
  double positive_similarity = 0.0;          // mean h_i · t_i
  double hardest_negative_similarity = 0.0;  // mean max over {h_i · f_i, h_i · t_j (j≠i)}
};
AlignmentStats alignment_stats(const AlignmentBatchFeatures& batch);

}  // namespace hralign

#endif  // HRALIGN_ALIGNMENT_H_
