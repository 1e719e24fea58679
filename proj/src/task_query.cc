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

#include "hralign/task_query.h"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "hralign/errors.h"

namespace hralign {

uint64_t fnv1a64(std::string_view bytes) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      if (!cur.empty()) tokens.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

namespace {

// Built once; every embedder shares the same immutable table.
const Tensor& frozen_table() {
  static const Tensor table = [] {
    RngState table_rng(QueryEmbedder::kTableSeed);
    return Tensor::randn({QueryEmbedder::kBuckets, QueryEmbedder::kTextWidth}, table_rng, 1.0);
  }();
  return table;
}

}  // namespace

QueryEmbedder::QueryEmbedder(size_t feature_width, RngState& rng) {
  if (feature_width == 0) throw ArgumentError("QueryEmbedder: feature width must be positive");
  table_ = frozen_table();
  projection_ = Tensor::randn({feature_width, kTextWidth}, rng,
                              1.0 / std::sqrt(static_cast<double>(kTextWidth)), true);
  bias_ = Tensor::zeros({feature_width}, true);
}

QueryEmbedder QueryEmbedder::from_weights(Tensor projection, Tensor bias) {
  if (projection.rank() != 2 || projection.dim(1) != kTextWidth || bias.rank() != 1 ||
      bias.dim(0) != projection.dim(0)) {
    throw DimensionError("QueryEmbedder: projection " + shape_str(projection.shape()) + " and bias " +
                         shape_str(bias.shape()) + " do not fit");
  }
  QueryEmbedder q;
  q.table_ = frozen_table();
  q.projection_ = std::move(projection);
  q.bias_ = std::move(bias);
  return q;
}

Tensor QueryEmbedder::text_features(const TaskDescription& desc) const {
  auto tokens = tokenize(desc.text);
  if (tokens.empty()) throw ArgumentError("task description text is empty");
  // Fixed summation order, so equal token multisets give bitwise-equal sums.
  std::sort(tokens.begin(), tokens.end());
  std::vector<double> acc(kTextWidth, 0.0);
  auto tab = table_.data();
  for (const auto& tok : tokens) {
    const size_t bucket = fnv1a64(tok) % kBuckets;
    for (size_t k = 0; k < kTextWidth; ++k) acc[k] += tab[bucket * kTextWidth + k];
  }
  for (double& v : acc) v /= static_cast<double>(tokens.size());
  return Tensor({kTextWidth}, std::move(acc));
}

void QueryEmbedder::set_trainable(bool trainable) {
  projection_.set_requires_grad(trainable);
  bias_.set_requires_grad(trainable);
}

QueryEmbedder QueryEmbedder::clone() const {
  QueryEmbedder out;
  out.table_ = table_;  // frozen, shared
  out.projection_ = projection_.clone();
  out.bias_ = bias_.clone();
  return out;
}

Tensor embed_task(const QueryEmbedder& embedder, const TaskDescription& desc) {
  const Tensor text = reshape(embedder.text_features(desc), {QueryEmbedder::kTextWidth, 1});
  const Tensor projected = reshape(matmul(embedder.projection(), text), {embedder.feature_width()});
  return add(projected, embedder.bias());
}

}  // namespace hralign
