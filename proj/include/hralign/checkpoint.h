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

// Trained-model state, per-step metrics, and their on-disk forms.
//
// Container layout: the 8 magic bytes "HRALCKPT", a little-endian uint64
// header length, a JSON header, then the serialized tensors back to back.
// The header lists every tensor's name, shape, byte offset (relative to the
// start of the tensor section) and byte size, plus run metadata.

#ifndef HRALIGN_CHECKPOINT_H_
#define HRALIGN_CHECKPOINT_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "hralign/adapter.h"
#include "hralign/config.h"
#include "hralign/encoder.h"
#include "hralign/optim.h"
#include "hralign/rng.h"
#include "hralign/task_query.h"

namespace hralign {

struct MetricsRecord {
  uint64_t step = 0;
  double loss = 0.0;
  double pos_sim = 0.0;
  double hard_neg_sim = 0.0;
  double wall_ms = 0.0;
};

struct MetricsLog {
  std::vector<MetricsRecord> records;

  std::string to_csv() const;
  static MetricsLog from_csv(std::string_view text);
  // Compares every column except wall_ms, bitwise.
  bool same_trajectory(const MetricsLog& other) const;
  void append(const MetricsLog& other);
};

inline constexpr const char* kMetricsHeader = "step,loss,pos_sim,hard_neg_sim,wall_ms";

// Linear task classifier used by the classification baseline.
struct ClassifierHead {
  Tensor weight;  // classes × C
  Tensor bias;    // classes

  static ClassifierHead create(size_t classes, size_t channels, RngState& rng);
  std::vector<Tensor> parameters() const { return {weight, bias}; }
  size_t parameter_count() const { return weight.size() + bias.size(); }
  ClassifierHead clone() const { return {weight.clone(), bias.clone()}; }
};

struct ModelCheckpoint {
  static constexpr uint32_t kVersion = 1;

  uint32_t version = kVersion;
  TrainConfig config;
  Backbone backbone;
  AdapterStack adapters;
  std::optional<QueryEmbedder> query;
  std::optional<ClassifierHead> head;
  AdamState optimizer;
  RngState rng;  // frame-sampling stream
  uint64_t step = 0;
  uint64_t epoch = 0;
  uint64_t cursor = 0;
  uint64_t config_hash = 0;

  // Parameters updated by the optimizer, in optimizer-state order.
  std::vector<Tensor> learnable_parameters() const;
  // Parameters added to or changed in the visual representation: adapters
  // for HR-Align and adapter-mode baselines, the whole backbone for
  // full fine-tunes.
  size_t learned_parameter_count() const;
  // Query projection or classifier head parameters.
  size_t head_parameter_count() const;

  ModelCheckpoint clone() const;
};

struct TensorContainer {
  nlohmann::json meta = nlohmann::json::object();
  std::vector<std::pair<std::string, Tensor>> tensors;

  const Tensor& get(const std::string& name) const;
};

std::string encode_container(const TensorContainer& c);
TensorContainer decode_container(std::string_view bytes);

void save_checkpoint(const ModelCheckpoint& ckpt, const std::filesystem::path& path);
ModelCheckpoint load_checkpoint(const std::filesystem::path& path);

void save_backbone(const Backbone& backbone, const std::filesystem::path& path);
Backbone load_backbone(const std::filesystem::path& path);

// Bitwise equality of all weights, optimizer moments and counters.
bool checkpoints_equal(const ModelCheckpoint& a, const ModelCheckpoint& b);
bool same_weights(const std::vector<Tensor>& a, const std::vector<Tensor>& b);

}  // namespace hralign

#endif  // HRALIGN_CHECKPOINT_H_
