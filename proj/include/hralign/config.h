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

// Run configuration and its flat `key = value` text form.

#ifndef HRALIGN_CONFIG_H_
#define HRALIGN_CONFIG_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace hralign {

enum class Method { kHrAlign, kPretBaseline, kClsBaseline };

std::string_view method_name(Method m);
Method parse_method(std::string_view name);

using KeyValues = std::vector<std::pair<std::string, std::string>>;

// One `key = value` per line; blank lines and `#` comments ignored.
KeyValues parse_key_values(std::string_view text);
KeyValues load_key_values(const std::filesystem::path& path);

bool parse_bool(std::string_view key, std::string_view value);
double parse_double(std::string_view key, std::string_view value);
uint64_t parse_uint(std::string_view key, std::string_view value);

struct TrainConfig {
  Method method = Method::kHrAlign;
  std::string adapter_positions = "L";
  bool use_language = true;
  size_t frames = 5;
  size_t batch_size = 16;
  double learning_rate = 1e-4;
  double temperature = 0.1;
  size_t steps = 300;
  uint64_t seed = 7;
  bool normalize = true;
  std::string output_dir = "runs/adapt";
  size_t bottleneck_ratio = 4;
  std::string baseline_data = "robot";         // robot | full
  std::string baseline_learnable = "backbone";  // backbone | adapter

  // Returns false when `key` is not a TrainConfig key.
  bool set(std::string_view key, std::string_view value);
  void validate() const;
  KeyValues entries() const;
  std::string to_text() const;
  // Hash of every field that shapes the training trajectory, i.e. all
  // except steps and output_dir.
  uint64_t trajectory_hash() const;

  bool operator==(const TrainConfig&) const = default;
};

std::vector<std::string> train_config_keys();

}  // namespace hralign

#endif  // HRALIGN_CONFIG_H_
