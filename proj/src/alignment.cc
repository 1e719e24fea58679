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

#include "hralign/alignment.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "hralign/errors.h"

namespace hralign {

namespace {

Tensor flatten_positions(const Tensor& features) {
  if (features.rank() != 4) {
    throw DimensionError("expected a T×H×W×C feature map, got " + shape_str(features.shape()));
  }
  const size_t c = features.dim(3);
  return reshape(features, {features.size() / c, c});
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

PooledFeature task_aware_pool(const Tensor& features, const Tensor& query, bool normalize, Stream stream) {
  const Tensor flat = flatten_positions(features);  // P × C
  const size_t c = flat.dim(1);
  if (query.rank() != 1 || query.dim(0) != c) {
    throw DimensionError("task_aware_pool: query " + shape_str(query.shape()) + " does not match feature width " +
                         std::to_string(c));
  }
  const Tensor logits = reshape(matmul(flat, reshape(query, {c, 1})), {flat.dim(0)});
  const Tensor weights = softmax(logits, 0);
  Tensor pooled = reshape(matmul(transpose(flat), reshape(weights, {flat.dim(0), 1})), {c});
  if (normalize) pooled = l2_normalize(pooled, 0);
  return {pooled, weights, stream};
}

PooledFeature task_aware_pool(const FeatureMap& features, const Tensor& query, bool normalize) {
  const Stream s = features.adapted ? Stream::kRobotAdapted
                   : features.domain == Domain::kHuman ? Stream::kHumanFrozen
                                                       : Stream::kRobotFrozen;
  return task_aware_pool(features.values, query, normalize, s);
}

PooledFeature uniform_pool(const Tensor& features, bool normalize, Stream stream) {
  const Tensor flat = flatten_positions(features);
  const size_t p = flat.dim(0);
  Tensor pooled = scale(sum(flat, 0), 1.0 / static_cast<double>(p));
  if (normalize) pooled = l2_normalize(pooled, 0);
  return {pooled, Tensor::full({p}, 1.0 / static_cast<double>(p)), stream};
}

double log_similarity(const Tensor& x, const Tensor& y, double temperature) {
  if (!(temperature > 0.0)) throw ArgumentError("similarity: temperature must be positive");
  if (x.size() != y.size()) {
    throw DimensionError("similarity: " + shape_str(x.shape()) + " vs " + shape_str(y.shape()));
  }
  return dot(x.data(), y.data()) / temperature;
}

double similarity(const Tensor& x, const Tensor& y, double temperature) {
  return std::exp(log_similarity(x, y, temperature));
}

namespace {

void validate(const AlignmentBatchFeatures& batch) {
  if (!(batch.temperature > 0.0)) throw ArgumentError("hr_align_loss: temperature must be positive");
  if (!batch.human_frozen.defined() || !batch.robot_frozen.defined() || !batch.robot_adapted.defined()) {
    throw ArgumentError("hr_align_loss: empty batch");
  }
  const Shape& s = batch.robot_adapted.shape();
  if (s.size() != 2 || batch.human_frozen.shape() != s || batch.robot_frozen.shape() != s) {
    throw DimensionError("hr_align_loss: feature lists must all be M×C, got " + shape_str(batch.human_frozen.shape()) +
                         ", " + shape_str(batch.robot_frozen.shape()) + ", " + shape_str(s));
  }
  if (s[0] == 0) throw ArgumentError("hr_align_loss: M must be >= 1");
  for (const Tensor* t : {&batch.human_frozen, &batch.robot_frozen, &batch.robot_adapted}) {
    for (double v : t->data()) {
      if (!std::isfinite(v)) throw NumericError("hr_align_loss: non-finite feature value");
    }
  }
}

}  // namespace

Tensor hr_align_loss(const AlignmentBatchFeatures& batch) {
  validate(batch);
  const size_t m = batch.robot_adapted.dim(0);
  const double inv_t = 1.0 / batch.temperature;
  const Tensor h = batch.human_frozen.detach();
  const Tensor f = batch.robot_frozen.detach();
  const Tensor& t = batch.robot_adapted;

  // pair_logits[i][j] = h_i · t_j / τ; frozen_logits[i] = h_i · f_i / τ.
  const Tensor pair_logits = scale(matmul(h, transpose(t)), inv_t);
  const Tensor frozen_logits = reshape(scale(sum(mul(h, f), 1), inv_t), {m, 1});
  const Tensor positives = diagonal(pair_logits);

  // Row i: human i against every adapted robot plus its own frozen robot.
  const Tensor human_to_robot = sub(logsumexp(concat(pair_logits, frozen_logits, 1), 1), positives);
  // Row i: adapted robot i against every human plus the frozen pair h_i · f_i.
  const Tensor robot_to_human =
      sub(logsumexp(concat(transpose(pair_logits), frozen_logits, 1), 1), positives);
  return scale(add(sum(human_to_robot), sum(robot_to_human)), 1.0 / (2.0 * static_cast<double>(m)));
}

AlignmentStats alignment_stats(const AlignmentBatchFeatures& batch) {
  validate(batch);
  const size_t m = batch.robot_adapted.dim(0), c = batch.robot_adapted.dim(1);
  auto h = batch.human_frozen.data(), f = batch.robot_frozen.data(), t = batch.robot_adapted.data();
  AlignmentStats s;
  for (size_t i = 0; i < m; ++i) {
    auto hi = h.subspan(i * c, c);
    s.positive_similarity += dot(hi, t.subspan(i * c, c));
    double worst = dot(hi, f.subspan(i * c, c));
    for (size_t j = 0; j < m; ++j) {
      if (j != i) worst = std::max(worst, dot(hi, t.subspan(j * c, c)));
    }
    s.hardest_negative_similarity += worst;
  }
  s.positive_similarity /= static_cast<double>(m);
  s.hardest_negative_similarity /= static_cast<double>(m);
  return s;
}

}  // namespace hralign
