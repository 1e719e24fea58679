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

// Adapter-position and language-query ablations.

#ifndef HRALIGN_ABLATION_H_
#define HRALIGN_ABLATION_H_

#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hralign/eval.h"
#include "hralign/trainer.h"

namespace hralign {

struct AblationVariant {
  std::string name;
  std::string positions;
  bool use_language = true;
};

// E, M, L, EML, and L with uniform pooling instead of the task query.
std::vector<AblationVariant> ablation_variants();

struct AblationRow {
  AblationVariant variant;
  size_t learned_params = 0;
  size_t head_params = 0;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  bool backbone_unchanged = false;
  RetrievalReport retrieval;
  DownstreamReport downstream;
};

using AblationHook = std::function<void(const AblationRow&, const TrainResult&)>;

std::vector<AblationRow> run_ablation_grid(const TrainConfig& base, const std::vector<PairedDemo>& train,
                                           const std::vector<PairedDemo>& heldout, const Backbone& backbone,
                                           const DownstreamOptions& downstream = {}, const AblationHook& hook = {});

std::string ablation_table(const std::vector<AblationRow>& rows);
nlohmann::json ablation_json(const std::vector<AblationRow>& rows);

}  // namespace hralign

#endif  // HRALIGN_ABLATION_H_
