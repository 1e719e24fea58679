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

#include "hralign/config.h"

#include <charconv>
#include <cmath>
#include <sstream>

#include "hralign/adapter.h"
#include "hralign/errors.h"
#include "hralign/task_query.h"
#include "hralign/tensor_io.h"

namespace hralign {

std::string_view method_name(Method m) {
  switch (m) {
    case Method::kHrAlign: return "hr_align";
    case Method::kPretBaseline: return "pret_baseline";
    case Method::kClsBaseline: return "cls_baseline";
  }
  return "?";
}

Method parse_method(std::string_view name) {
  if (name == "hr_align") return Method::kHrAlign;
  if (name == "pret_baseline") return Method::kPretBaseline;
  if (name == "cls_baseline") return Method::kClsBaseline;
  throw ArgumentError("unknown method '" + std::string(name) + "'");
}

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

KeyValues parse_key_values(std::string_view text) {
  KeyValues out;
  size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ArgumentError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const auto key = trim(line.substr(0, eq));
    if (key.empty()) throw ArgumentError("config line " + std::to_string(line_no) + ": empty key");
    out.emplace_back(std::string(key), std::string(trim(line.substr(eq + 1))));
  }
  return out;
}

KeyValues load_key_values(const std::filesystem::path& path) {
  return parse_key_values(read_file_bytes(path));
}

bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw ArgumentError("config key '" + std::string(key) + "': expected a boolean, got '" + std::string(value) + "'");
}

double parse_double(std::string_view key, std::string_view value) {
  try {
    size_t used = 0;
    const double v = std::stod(std::string(value), &used);
    if (used == value.size() && std::isfinite(v)) return v;
  } catch (const std::exception&) {
  }
  throw ArgumentError("config key '" + std::string(key) + "': expected a number, got '" + std::string(value) + "'");
}

uint64_t parse_uint(std::string_view key, std::string_view value) {
  uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || ptr != value.data() + value.size() || value.empty()) {
    throw ArgumentError("config key '" + std::string(key) + "': expected a non-negative integer, got '" +
                        std::string(value) + "'");
  }
  return v;
}

std::vector<std::string> train_config_keys() {
  std::vector<std::string> keys;
  for (const auto& [k, v] : TrainConfig{}.entries()) keys.push_back(k);
  return keys;
}

bool TrainConfig::set(std::string_view key, std::string_view value) {
  if (key == "method") method = parse_method(value);
  else if (key == "adapter_positions") adapter_positions = std::string(value);
  else if (key == "use_language") use_language = parse_bool(key, value);
  else if (key == "frames") frames = parse_uint(key, value);
  else if (key == "batch_size") batch_size = parse_uint(key, value);
  else if (key == "learning_rate") learning_rate = parse_double(key, value);
  else if (key == "temperature") temperature = parse_double(key, value);
  else if (key == "steps") steps = parse_uint(key, value);
  else if (key == "seed") seed = parse_uint(key, value);
  else if (key == "normalize") normalize = parse_bool(key, value);
  else if (key == "output_dir") output_dir = std::string(value);
  else if (key == "bottleneck_ratio") bottleneck_ratio = parse_uint(key, value);
  else if (key == "baseline_data") baseline_data = std::string(value);
  else if (key == "baseline_learnable") baseline_learnable = std::string(value);
  else return false;
  return true;
}

void TrainConfig::validate() const {
  if (frames == 0) throw ArgumentError("frames must be positive");
  if (batch_size == 0) throw ArgumentError("batch_size must be positive");
  if (!(learning_rate > 0.0)) throw ArgumentError("learning_rate must be positive");
  if (!(temperature > 0.0)) throw ArgumentError("temperature must be positive");
  if (bottleneck_ratio == 0) throw ArgumentError("bottleneck_ratio must be positive");
  if (output_dir.empty()) throw ArgumentError("output_dir must not be empty");
  canonical_positions(adapter_positions);
  if (baseline_data != "robot" && baseline_data != "full") {
    throw ArgumentError("baseline_data must be 'robot' or 'full'");
  }
  if (baseline_learnable != "backbone" && baseline_learnable != "adapter") {
    throw ArgumentError("baseline_learnable must be 'backbone' or 'adapter'");
  }
  if (method == Method::kHrAlign && canonical_positions(adapter_positions) == "none" && !use_language) {
    throw ArgumentError("hr_align with no adapters and no language query has nothing to learn");
  }
  if (method != Method::kHrAlign && baseline_learnable == "adapter" &&
      canonical_positions(adapter_positions) == "none") {
    throw ArgumentError("baseline_learnable = adapter needs adapter_positions");
  }
}

namespace {

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

KeyValues TrainConfig::entries() const {
  return {{"method", std::string(method_name(method))},
          {"adapter_positions", adapter_positions},
          {"use_language", use_language ? "true" : "false"},
          {"frames", std::to_string(frames)},
          {"batch_size", std::to_string(batch_size)},
          {"learning_rate", format_double(learning_rate)},
          {"temperature", format_double(temperature)},
          {"steps", std::to_string(steps)},
          {"seed", std::to_string(seed)},
          {"normalize", normalize ? "true" : "false"},
          {"output_dir", output_dir},
          {"bottleneck_ratio", std::to_string(bottleneck_ratio)},
          {"baseline_data", baseline_data},
          {"baseline_learnable", baseline_learnable}};
}

std::string TrainConfig::to_text() const {
  std::string out;
  for (const auto& [k, v] : entries()) out += k + " = " + v + "\n";
  return out;
}

uint64_t TrainConfig::trajectory_hash() const {
  std::string canon;
  for (const auto& [k, v] : entries()) {
    if (k == "steps" || k == "output_dir") continue;
    canon += k + "=" + v + ";";
  }
  return fnv1a64(canon);
}

}  // namespace hralign
