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

#include "hralign/checkpoint.h"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <sstream>

#include "hralign/errors.h"
#include "hralign/tensor_io.h"

namespace hralign {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'H', 'R', 'A', 'L', 'C', 'K', 'P', 'T'};

std::string hex64(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

uint64_t parse_hex64(const std::string& s) {
  try {
    size_t used = 0;
    const uint64_t v = std::stoull(s, &used, 16);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw LoadError("malformed hex value '" + s + "'");
}

std::string format_exact(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::string MetricsLog::to_csv() const {
  std::string out = std::string(kMetricsHeader) + "\n";
  for (const auto& r : records) {
    out += std::to_string(r.step) + "," + format_exact(r.loss) + "," + format_exact(r.pos_sim) + "," +
           format_exact(r.hard_neg_sim) + "," + format_exact(r.wall_ms) + "\n";
  }
  return out;
}

MetricsLog MetricsLog::from_csv(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader) throw LoadError("metrics CSV: bad header");
  MetricsLog log;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    MetricsRecord r;
    char c1, c2, c3, c4;
    std::istringstream row(line);
    if (!(row >> r.step >> c1 >> r.loss >> c2 >> r.pos_sim >> c3 >> r.hard_neg_sim >> c4 >> r.wall_ms)) {
      throw LoadError("metrics CSV: malformed row '" + line + "'");
    }
    log.records.push_back(r);
  }
  return log;
}

bool MetricsLog::same_trajectory(const MetricsLog& other) const {
  if (records.size() != other.records.size()) return false;
  for (size_t i = 0; i < records.size(); ++i) {
    const auto& a = records[i];
    const auto& b = other.records[i];
    if (a.step != b.step || std::bit_cast<uint64_t>(a.loss) != std::bit_cast<uint64_t>(b.loss) ||
        std::bit_cast<uint64_t>(a.pos_sim) != std::bit_cast<uint64_t>(b.pos_sim) ||
        std::bit_cast<uint64_t>(a.hard_neg_sim) != std::bit_cast<uint64_t>(b.hard_neg_sim)) {
      return false;
    }
  }
  return true;
}

void MetricsLog::append(const MetricsLog& other) {
  if (!records.empty() && !other.records.empty() && other.records.front().step <= records.back().step) {
    throw ArgumentError("MetricsLog::append: step numbers must keep increasing");
  }
  records.insert(records.end(), other.records.begin(), other.records.end());
}

ClassifierHead ClassifierHead::create(size_t classes, size_t channels, RngState& rng) {
  return {Tensor::randn({classes, channels}, rng, 1.0 / std::sqrt(static_cast<double>(channels)), true),
          Tensor::zeros({classes}, true)};
}

std::vector<Tensor> ModelCheckpoint::learnable_parameters() const {
  std::vector<Tensor> out;
  auto append = [&out](const std::vector<Tensor>& ts) { out.insert(out.end(), ts.begin(), ts.end()); };
  if (config.method == Method::kHrAlign) {
    append(adapters.parameters());
    if (config.use_language && query) append(query->parameters());
  } else {
    if (config.baseline_learnable == "adapter") {
      append(adapters.parameters());
    } else {
      append(backbone.parameters());
    }
    if (head) append(head->parameters());
  }
  return out;
}

size_t ModelCheckpoint::learned_parameter_count() const {
  if (config.method != Method::kHrAlign && config.baseline_learnable == "backbone") {
    return backbone.parameter_count();
  }
  return adapters.parameter_count();
}

size_t ModelCheckpoint::head_parameter_count() const {
  if (config.method == Method::kHrAlign) return config.use_language && query ? query->parameter_count() : 0;
  return head ? head->parameter_count() : 0;
}

ModelCheckpoint ModelCheckpoint::clone() const {
  ModelCheckpoint c = *this;
  c.backbone = backbone.clone();
  c.adapters = adapters.clone();
  if (query) c.query = query->clone();
  if (head) c.head = head->clone();
  return c;
}

const Tensor& TensorContainer::get(const std::string& name) const {
  for (const auto& [n, t] : tensors) {
    if (n == name) return t;
  }
  throw LoadError("container has no tensor named '" + name + "'");
}

std::string encode_container(const TensorContainer& c) {
  json header = c.meta;
  header["format_version"] = ModelCheckpoint::kVersion;
  json index = json::array();
  std::string blob;
  for (const auto& [name, t] : c.tensors) {
    const std::string bytes = serialize_tensor(t);
    index.push_back({{"name", name}, {"shape", t.shape()}, {"offset", blob.size()}, {"size", bytes.size()}});
    blob += bytes;
  }
  header["tensors"] = std::move(index);
  const std::string head = header.dump();
  std::string out(kMagic, sizeof(kMagic));
  uint64_t len = head.size();
  if constexpr (std::endian::native == std::endian::big) len = __builtin_bswap64(len);
  out.append(reinterpret_cast<const char*>(&len), sizeof(len));
  out += head;
  out += blob;
  return out;
}

TensorContainer decode_container(std::string_view bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 8) != 0) {
    throw LoadError("not a checkpoint container (bad magic)");
  }
  uint64_t len = 0;
  std::memcpy(&len, bytes.data() + 8, sizeof(len));
  if constexpr (std::endian::native == std::endian::big) len = __builtin_bswap64(len);
  if (16 + len > bytes.size()) throw LoadError("checkpoint header truncated");
  TensorContainer c;
  try {
    c.meta = json::parse(bytes.substr(16, len));
    if (c.meta.at("format_version").get<uint32_t>() != ModelCheckpoint::kVersion) {
      throw LoadError("unsupported checkpoint version");
    }
    const std::string_view blob = bytes.substr(16 + len);
    for (const auto& entry : c.meta.at("tensors")) {
      const size_t offset = entry.at("offset").get<size_t>();
      const size_t size = entry.at("size").get<size_t>();
      if (offset + size > blob.size()) throw LoadError("tensor '" + entry.at("name").get<std::string>() + "' truncated");
      Tensor t = deserialize_tensor(blob.substr(offset, size));
      if (t.shape() != entry.at("shape").get<Shape>()) {
        throw LoadError("tensor '" + entry.at("name").get<std::string>() + "' shape disagrees with header");
      }
      c.tensors.emplace_back(entry.at("name").get<std::string>(), std::move(t));
    }
  } catch (const json::exception& e) {
    throw LoadError(std::string("malformed checkpoint header: ") + e.what());
  }
  c.meta.erase("tensors");
  return c;
}

namespace {

void put_backbone(TensorContainer& c, const Backbone& b) {
  json strides = json::array(), paddings = json::array();
  for (size_t i = 0; i < b.num_blocks(); ++i) {
    c.tensors.emplace_back("backbone." + std::to_string(i) + ".weight", b.block(i).weight);
    c.tensors.emplace_back("backbone." + std::to_string(i) + ".bias", b.block(i).bias);
    strides.push_back(b.block(i).stride);
    paddings.push_back(b.block(i).padding);
  }
  c.meta["backbone"] = {{"blocks", b.num_blocks()}, {"strides", strides}, {"paddings", paddings}};
}

Backbone get_backbone(const TensorContainer& c, bool frozen) {
  const json& m = c.meta.at("backbone");
  std::vector<ConvBlock> blocks;
  for (size_t i = 0; i < m.at("blocks").get<size_t>(); ++i) {
    ConvBlock blk;
    blk.weight = c.get("backbone." + std::to_string(i) + ".weight").clone();
    blk.bias = c.get("backbone." + std::to_string(i) + ".bias").clone();
    blk.stride = m.at("strides").at(i).get<int>();
    blk.padding = m.at("paddings").at(i).get<int>();
    blocks.push_back(std::move(blk));
  }
  return Backbone::from_blocks(std::move(blocks), frozen);
}

}  // namespace

void save_checkpoint(const ModelCheckpoint& ckpt, const fs::path& path) {
  TensorContainer c;
  c.meta["kind"] = "model";
  c.meta["version"] = ckpt.version;
  c.meta["config_hash"] = hex64(ckpt.config_hash);
  json cfg = json::object();
  for (const auto& [k, v] : ckpt.config.entries()) cfg[k] = v;
  c.meta["config"] = cfg;
  c.meta["step"] = ckpt.step;
  c.meta["epoch"] = ckpt.epoch;
  c.meta["cursor"] = ckpt.cursor;
  c.meta["rng"] = {{"seed", hex64(ckpt.rng.seed)}, {"position", hex64(ckpt.rng.position)}};
  c.meta["adam"] = {{"step", ckpt.optimizer.step},
                    {"learning_rate", format_exact(ckpt.optimizer.learning_rate)},
                    {"beta1", format_exact(ckpt.optimizer.beta1)},
                    {"beta2", format_exact(ckpt.optimizer.beta2)},
                    {"epsilon", format_exact(ckpt.optimizer.epsilon)},
                    {"buffers", ckpt.optimizer.first_moment.size()}};
  c.meta["backbone_frozen"] = ckpt.backbone.frozen();
  put_backbone(c, ckpt.backbone);

  json adapters = json::array();
  for (const auto& ins : ckpt.adapters.insertions()) {
    const std::string base = "adapter." + std::to_string(ins.boundary);
    adapters.push_back({{"boundary", ins.boundary},
                        {"position", std::string(1, position_letter(ins.position))},
                        {"ratio", ins.block.ratio}});
    c.tensors.emplace_back(base + ".down_weight", ins.block.down_weight);
    c.tensors.emplace_back(base + ".down_bias", ins.block.down_bias);
    c.tensors.emplace_back(base + ".up_weight", ins.block.up_weight);
    c.tensors.emplace_back(base + ".up_bias", ins.block.up_bias);
  }
  c.meta["adapters"] = {{"positions", ckpt.adapters.positions()}, {"blocks", adapters}};

  c.meta["has_query"] = ckpt.query.has_value();
  if (ckpt.query) {
    c.meta["query_table_seed"] = hex64(QueryEmbedder::kTableSeed);
    c.tensors.emplace_back("query.projection", ckpt.query->projection());
    c.tensors.emplace_back("query.bias", ckpt.query->bias());
  }
  c.meta["has_head"] = ckpt.head.has_value();
  if (ckpt.head) {
    c.tensors.emplace_back("head.weight", ckpt.head->weight);
    c.tensors.emplace_back("head.bias", ckpt.head->bias);
  }
  for (size_t i = 0; i < ckpt.optimizer.first_moment.size(); ++i) {
    const auto& m = ckpt.optimizer.first_moment[i];
    const auto& v = ckpt.optimizer.second_moment[i];
    c.tensors.emplace_back("adam.m." + std::to_string(i), Tensor({m.size()}, m));
    c.tensors.emplace_back("adam.v." + std::to_string(i), Tensor({v.size()}, v));
  }
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_file_atomic(path, encode_container(c));
}

ModelCheckpoint load_checkpoint(const fs::path& path) {
  TensorContainer c;
  try {
    c = decode_container(read_file_bytes(path));
  } catch (const LoadError& e) {
    throw LoadError(path.string() + ": " + e.what());
  } catch (const IoError& e) {
    throw LoadError(e.what());
  }
  ModelCheckpoint ckpt;
  try {
    const json& m = c.meta;
    if (m.at("kind").get<std::string>() != "model") throw LoadError("not a model checkpoint");
    ckpt.version = m.at("version").get<uint32_t>();
    for (const auto& [k, v] : m.at("config").items()) {
      if (!ckpt.config.set(k, v.get<std::string>())) throw LoadError("unknown config key '" + k + "'");
    }
    ckpt.config_hash = parse_hex64(m.at("config_hash").get<std::string>());
    ckpt.step = m.at("step").get<uint64_t>();
    ckpt.epoch = m.at("epoch").get<uint64_t>();
    ckpt.cursor = m.at("cursor").get<uint64_t>();
    ckpt.rng = RngState(parse_hex64(m.at("rng").at("seed").get<std::string>()),
                        parse_hex64(m.at("rng").at("position").get<std::string>()));
    ckpt.backbone = get_backbone(c, m.at("backbone_frozen").get<bool>());

    std::vector<AdapterInsertion> insertions;
    for (const auto& a : m.at("adapters").at("blocks")) {
      const size_t boundary = a.at("boundary").get<size_t>();
      const std::string base = "adapter." + std::to_string(boundary);
      const char letter = a.at("position").get<std::string>().at(0);
      const Position pos = letter == 'E' ? Position::kEarly : letter == 'M' ? Position::kMiddle : Position::kLate;
      AdapterBlock blk{c.get(base + ".down_weight").clone(), c.get(base + ".down_bias").clone(),
                       c.get(base + ".up_weight").clone(), c.get(base + ".up_bias").clone(),
                       a.at("ratio").get<size_t>()};
      insertions.push_back({pos, boundary, std::move(blk)});
    }
    ckpt.adapters = AdapterStack::from_insertions(m.at("adapters").at("positions").get<std::string>(),
                                                  std::move(insertions));
    if (m.at("has_query").get<bool>()) {
      ckpt.query = QueryEmbedder::from_weights(c.get("query.projection").clone(), c.get("query.bias").clone());
    }
    if (m.at("has_head").get<bool>()) {
      ckpt.head = ClassifierHead{c.get("head.weight").clone(), c.get("head.bias").clone()};
    }
    // Parameters are stored as plain values; the trainer decides what learns.
    ckpt.adapters.set_trainable(false);
    if (ckpt.query) ckpt.query->set_trainable(false);
    if (ckpt.head) {
      ckpt.head->weight.set_requires_grad(false);
      ckpt.head->bias.set_requires_grad(false);
    }

    const json& adam = m.at("adam");
    ckpt.optimizer.step = adam.at("step").get<uint64_t>();
    ckpt.optimizer.learning_rate = std::stod(adam.at("learning_rate").get<std::string>());
    ckpt.optimizer.beta1 = std::stod(adam.at("beta1").get<std::string>());
    ckpt.optimizer.beta2 = std::stod(adam.at("beta2").get<std::string>());
    ckpt.optimizer.epsilon = std::stod(adam.at("epsilon").get<std::string>());
    for (size_t i = 0; i < adam.at("buffers").get<size_t>(); ++i) {
      const auto mv = c.get("adam.m." + std::to_string(i)).data();
      const auto vv = c.get("adam.v." + std::to_string(i)).data();
      ckpt.optimizer.first_moment.emplace_back(mv.begin(), mv.end());
      ckpt.optimizer.second_moment.emplace_back(vv.begin(), vv.end());
    }
  } catch (const json::exception& e) {
    throw LoadError(path.string() + ": malformed checkpoint: " + e.what());
  } catch (const std::invalid_argument& e) {
    throw LoadError(path.string() + ": inconsistent checkpoint: " + e.what());
  }
  return ckpt;
}

void save_backbone(const Backbone& backbone, const fs::path& path) {
  TensorContainer c;
  c.meta["kind"] = "backbone";
  put_backbone(c, backbone);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_file_atomic(path, encode_container(c));
}

Backbone load_backbone(const fs::path& path) {
  try {
    const TensorContainer c = decode_container(read_file_bytes(path));
    const std::string kind = c.meta.at("kind").get<std::string>();
    if (kind != "backbone" && kind != "model") throw LoadError("unknown container kind '" + kind + "'");
    return get_backbone(c, true);
  } catch (const json::exception& e) {
    throw LoadError(path.string() + ": malformed backbone file: " + e.what());
  } catch (const LoadError& e) {
    throw LoadError(path.string() + ": " + e.what());
  } catch (const IoError& e) {
    throw LoadError(e.what());
  }
}

bool same_weights(const std::vector<Tensor>& a, const std::vector<Tensor>& b) {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i) {
    if (a[i].shape() != b[i].shape()) return false;
    if (std::memcmp(a[i].data().data(), b[i].data().data(), a[i].size() * sizeof(double)) != 0) return false;
  }
  return true;
}

bool checkpoints_equal(const ModelCheckpoint& a, const ModelCheckpoint& b) {
  if (a.step != b.step || a.epoch != b.epoch || a.cursor != b.cursor || a.config_hash != b.config_hash ||
      !(a.rng == b.rng) || a.optimizer.step != b.optimizer.step) {
    return false;
  }
  if (!same_weights(a.backbone.parameters(), b.backbone.parameters())) return false;
  if (a.adapters.positions() != b.adapters.positions() ||
      !same_weights(a.adapters.parameters(), b.adapters.parameters())) {
    return false;
  }
  if (a.query.has_value() != b.query.has_value() ||
      (a.query && !same_weights(a.query->parameters(), b.query->parameters()))) {
    return false;
  }
  if (a.head.has_value() != b.head.has_value() ||
      (a.head && !same_weights(a.head->parameters(), b.head->parameters()))) {
    return false;
  }
  if (a.optimizer.first_moment != b.optimizer.first_moment ||
      a.optimizer.second_moment != b.optimizer.second_moment) {
    return false;
  }
  return true;
}

}  // namespace hralign
