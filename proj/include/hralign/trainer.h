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

// HR-Align adaptation and the two full fine-tune baselines.

#ifndef HRALIGN_TRAINER_H_
#define HRALIGN_TRAINER_H_

#include <cstdint>
#include <functional>
#include <vector>

#include "hralign/checkpoint.h"
#include "hralign/config.h"
#include "hralign/dataset.h"
#include "hralign/encoder.h"

namespace hralign {

struct TrainResult {
  ModelCheckpoint checkpoint;
  MetricsLog metrics;  // steps run by this call only
  // Classification baseline: accuracy over the whole training set after the
  // last step, using every frame of each clip. Zero for other methods.
  double final_accuracy = 0.0;
};

// Called after each optimizer step with the checkpoint state at that step.
using StepHook = std::function<void(const ModelCheckpoint&, const MetricsRecord&)>;

// Builds the step-0 state for `config`: parameters, optimizer, RNG streams.
ModelCheckpoint initial_checkpoint(const TrainConfig& config, const Backbone& backbone, size_t num_classes = 0);

// `config.steps` is the total step target. With `resume`, training continues
// from the stored step; the resume checkpoint's config hash must match.
TrainResult train_hr_align(const TrainConfig& config, const std::vector<PairedDemo>& data,
                           const Backbone& backbone, const ModelCheckpoint* resume = nullptr,
                           const StepHook& hook = {});
TrainResult train_baseline_pret(const TrainConfig& config, const std::vector<PairedDemo>& data,
                                const Backbone& backbone, const ModelCheckpoint* resume = nullptr,
                                const StepHook& hook = {});
TrainResult train_baseline_cls(const TrainConfig& config, const std::vector<PairedDemo>& data,
                               const Backbone& backbone, const ModelCheckpoint* resume = nullptr,
                               const StepHook& hook = {});
// Dispatches on config.method.
TrainResult train(const TrainConfig& config, const std::vector<PairedDemo>& data, const Backbone& backbone,
                  const ModelCheckpoint* resume = nullptr, const StepHook& hook = {});

// Shuffled order of pair indices for one epoch.
std::vector<size_t> epoch_order(uint64_t seed, uint64_t epoch, size_t n);

// Dense class index per distinct task id, in ascending id order.
std::vector<int> task_classes(const std::vector<PairedDemo>& data);

}  // namespace hralign

#endif  // HRALIGN_TRAINER_H_
