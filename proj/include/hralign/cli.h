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

// Command-line front end: generate, pretrain, adapt, baseline, ablate, eval,
// dump.

#ifndef HRALIGN_CLI_H_
#define HRALIGN_CLI_H_

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "hralign/config.h"

namespace hralign {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

// Everything a subcommand can read from a config file: the training keys
// plus data generation and artifact paths.
struct RunConfig {
  TrainConfig train;
  size_t n_tasks = 8;
  size_t pairs_per_task = 32;
  size_t heldout_pairs_per_task = 16;
  double gap = 0.7;
  size_t pretrain_epochs = 20;
  double pretrain_learning_rate = 3e-4;
  std::string data = "runs/data/train/manifest.json";
  std::string heldout = "runs/data/heldout/manifest.json";
  std::string backbone = "runs/pretrain/backbone.ckpt";
  std::string checkpoint = "runs/adapt/model.ckpt";
  bool output_dir_set = false;

  // Throws ArgumentError for unknown keys or malformed values.
  void set(std::string_view key, std::string_view value);
  std::string to_text() const;
};

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int cli_main(int argc, char** argv);

}  // namespace hralign

#endif  // HRALIGN_CLI_H_
