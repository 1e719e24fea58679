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

#include "hralign/tensor_io.h"

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "hralign/errors.h"

namespace hralign {

namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <typename T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  }
}

template <typename T>
void put(std::string& out, T v) {
  v = to_little(v);
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T get(std::string_view bytes, size_t& offset) {
  if (offset + sizeof(T) > bytes.size()) throw LoadError("tensor data truncated");
  T v;
  std::memcpy(&v, bytes.data() + offset, sizeof(T));
  offset += sizeof(T);
  return to_little(v);
}

}  // namespace

std::string serialize_tensor(const Tensor& t) {
  std::string out;
  out.reserve(4 + 4 * t.rank() + 8 * t.size());
  put<uint32_t>(out, static_cast<uint32_t>(t.rank()));
  for (size_t d : t.shape()) put<uint32_t>(out, static_cast<uint32_t>(d));
  for (double v : t.data()) put<uint64_t>(out, std::bit_cast<uint64_t>(v));
  return out;
}

Tensor deserialize_tensor(std::string_view bytes, size_t& offset) {
  const uint32_t rank = get<uint32_t>(bytes, offset);
  if (rank == 0 || rank > 8) throw LoadError("tensor rank " + std::to_string(rank) + " is invalid");
  Shape shape(rank);
  for (auto& d : shape) {
    d = get<uint32_t>(bytes, offset);
    if (d == 0) throw LoadError("tensor has a zero dimension");
  }
  const size_t n = numel(shape);
  if (offset + n * 8 > bytes.size()) throw LoadError("tensor data truncated");
  std::vector<double> values(n);
  for (auto& v : values) v = std::bit_cast<double>(get<uint64_t>(bytes, offset));
  return Tensor(std::move(shape), std::move(values));
}

Tensor deserialize_tensor(std::string_view bytes) {
  size_t offset = 0;
  Tensor t = deserialize_tensor(bytes, offset);
  if (offset != bytes.size()) throw LoadError("trailing bytes after tensor");
  return t;
}

std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("short write to " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

void save_tensor(const Tensor& t, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_tensor(t));
}

Tensor load_tensor(const std::filesystem::path& path) {
  const std::string bytes = read_file_bytes(path);
  try {
    return deserialize_tensor(bytes);
  } catch (const LoadError& e) {
    throw LoadError(path.string() + ": " + e.what());
  }
}

}  // namespace hralign
