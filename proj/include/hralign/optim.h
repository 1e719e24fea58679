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

#ifndef HRALIGN_OPTIM_H_
#define HRALIGN_OPTIM_H_

#include <cstdint>
#include <span>
#include <vector>

#include "hralign/tensor.h"

namespace hralign {

struct AdamState {
  uint64_t step = 0;
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  // One buffer per parameter, in the order parameters are passed to adam_step.
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;

  static AdamState for_params(std::span<const Tensor> params, double learning_rate);
};

// One bias-corrected Adam update using each parameter's accumulated grad.
// Parameters without a grad are treated as having a zero gradient.
void adam_step(std::span<Tensor> params, AdamState& state);

// Same update with explicitly supplied gradients.
void adam_step(std::span<Tensor> params, std::span<const std::vector<double>> grads,
               AdamState& state);

void zero_grads(std::span<Tensor> params);

}  // namespace hralign

#endif  // HRALIGN_OPTIM_H_
