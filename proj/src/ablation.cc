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

#include "hralign/ablation.h"

#include <cstdio>

namespace hralign {

std::vector<AblationVariant> ablation_variants() {
  return {{"E", "E", true}, {"M", "M", true}, {"L", "L", true}, {"EML", "EML", true}, {"L-nolang", "L", false}};
}

std::vector<AblationRow> run_ablation_grid(const TrainConfig& base, const std::vector<PairedDemo>& train,
                                           const std::vector<PairedDemo>& heldout, const Backbone& backbone,
                                           const DownstreamOptions& downstream, const AblationHook& hook) {
  std::vector<AblationRow> rows;
  for (const AblationVariant& v : ablation_variants()) {
    TrainConfig cfg = base;
    cfg.method = Method::kHrAlign;
    cfg.adapter_positions = v.positions;
    cfg.use_language = v.use_language;
    const TrainResult result = train_hr_align(cfg, train, backbone);
    const ModelCheckpoint& ckpt = result.checkpoint;

    AblationRow row;
    row.variant = v;
    row.learned_params = ckpt.learned_parameter_count();
    row.head_params = ckpt.head_parameter_count();
    if (!result.metrics.records.empty()) {
      row.initial_loss = result.metrics.records.front().loss;
      row.final_loss = result.metrics.records.back().loss;
    }
    row.backbone_unchanged = same_weights(ckpt.backbone.parameters(), backbone.parameters());
    row.retrieval = eval_retrieval(adapted_model(ckpt, v.name), heldout);
    row.downstream = eval_downstream(adapted_model(ckpt, v.name), heldout, downstream);
    if (hook) hook(row, result);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string ablation_table(const std::vector<AblationRow>& rows) {
  std::string out =
      "variant\tpositions\tlanguage\tlearned_params\thead_params\tinitial_loss\tfinal_loss\tr2h_r1\th2r_r1\tmrr\t"
      "probe_acc\tbc_mse\tsuccess\n";
  char buf[512];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%s\t%s\t%d\t%zu\t%zu\t%.6f\t%.6f\t%.4f\t%.4f\t%.4f\t%.4f\t%.6f\t%.4f\n",
                  r.variant.name.c_str(), r.variant.positions.c_str(), r.variant.use_language ? 1 : 0,
                  r.learned_params, r.head_params, r.initial_loss, r.final_loss, r.retrieval.robot_to_human_r1,
                  r.retrieval.human_to_robot_r1, r.retrieval.mrr, r.downstream.probe_accuracy,
                  r.downstream.bc_action_error, r.downstream.success_rate);
    out += buf;
  }
  return out;
}

nlohmann::json ablation_json(const std::vector<AblationRow>& rows) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : rows) {
    out.push_back({{"variant", r.variant.name},
                   {"positions", r.variant.positions},
                   {"use_language", r.variant.use_language},
                   {"learned_params", r.learned_params},
                   {"head_params", r.head_params},
                   {"initial_loss", r.initial_loss},
                   {"final_loss", r.final_loss},
                   {"backbone_unchanged", r.backbone_unchanged},
                   {"retrieval", r.retrieval.to_json()},
                   {"downstream", r.downstream.to_json()}});
  }
  return out;
}

}  // namespace hralign
