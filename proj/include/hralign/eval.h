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

// Retrieval and downstream evaluation of frozen vs adapted representations,
// and embedding dumps.

#ifndef HRALIGN_EVAL_H_
#define HRALIGN_EVAL_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hralign/checkpoint.h"
#include "hralign/dataset.h"

namespace hralign {

// A read-only view of a checkpoint as an encoder.
struct EvalModel {
  const ModelCheckpoint* checkpoint = nullptr;
  // When false the adapters are bypassed and the robot stream equals the
  // frozen stream.
  bool adapted = true;
  std::string tag;
};

EvalModel adapted_model(const ModelCheckpoint& ckpt, std::string tag = "adapted");
EvalModel frozen_model(const ModelCheckpoint& ckpt, std::string tag = "frozen");

// Per-frame feature maps of a whole clip, T×Ĥ×Ŵ×Ĉ. Human clips of an
// HR-Align checkpoint always take the frozen stream.
Tensor clip_feature_map(const EvalModel& model, const VideoClip& clip);
// Pooled Ĉ embedding: task-aware when the checkpoint uses language,
// uniform otherwise.
Tensor clip_embedding(const EvalModel& model, const VideoClip& clip, const TaskDescription& desc);

struct RetrievalReport {
  double robot_to_human_r1 = 0.0;
  double robot_to_human_r5 = 0.0;
  double human_to_robot_r1 = 0.0;
  double human_to_robot_r5 = 0.0;
  double mrr = 0.0;  // mean over both directions
  size_t pairs = 0;
  std::string tag;

  nlohmann::json to_json() const;
  std::string to_text() const;
};

// Rows of `human` and `robot` are paired by index (N×D each). Ranks are by
// dot product; ties count against the true pair.
RetrievalReport retrieval_from_embeddings(const std::vector<std::vector<double>>& human,
                                          const std::vector<std::vector<double>>& robot, std::string tag = "");
RetrievalReport eval_retrieval(const EvalModel& model, const std::vector<PairedDemo>& heldout);

struct DownstreamOptions {
  uint64_t seed = 11;
  double test_fraction = 0.25;
  size_t probe_epochs = 300;
  double probe_learning_rate = 1e-2;
  size_t bc_hidden = 32;
  size_t bc_epochs = 300;
  double bc_learning_rate = 3e-3;
  size_t bc_frames_per_clip = 4;
  double success_radius = 0.15;
};

struct DownstreamReport {
  double probe_accuracy = 0.0;
  double bc_action_error = 0.0;
  double success_rate = 0.0;
  size_t train_clips = 0;
  size_t test_clips = 0;
  std::string tag;

  nlohmann::json to_json() const;
  std::string to_text() const;
};

// Seeded split stratified by label; each label with at least two items puts
// one or more in the test part.
struct Split {
  std::vector<size_t> train;
  std::vector<size_t> test;
};
Split stratified_split(const std::vector<int>& labels, double test_fraction, uint64_t seed);

// Softmax-regression probe on standardized features. Returns test accuracy.
double linear_probe_accuracy(const std::vector<std::vector<double>>& features, const std::vector<int>& labels,
                             const Split& split, const DownstreamOptions& options = {});

// Pairs (robot demo) must carry latent trajectories.
DownstreamReport eval_downstream(const EvalModel& model, const std::vector<PairedDemo>& robot_demos,
                                 const DownstreamOptions& options = {});

struct EmbeddingRow {
  int clip_id = 0;
  int task_id = 0;
  Domain domain = Domain::kHuman;
  bool adapted = false;
  std::vector<double> values;
};

std::vector<EmbeddingRow> embedding_rows(const EvalModel& model, const std::vector<PairedDemo>& demos);
std::string embeddings_csv(const std::vector<EmbeddingRow>& rows, size_t width);
// Writes one row per clip (human and robot of every pair).
void dump_embeddings(const EvalModel& model, const std::vector<PairedDemo>& demos,
                     const std::filesystem::path& path);
// Mean Euclidean distance over all unordered row pairs sharing a task id.
double mean_within_task_distance(const std::vector<EmbeddingRow>& rows);

}  // namespace hralign

#endif  // HRALIGN_EVAL_H_
