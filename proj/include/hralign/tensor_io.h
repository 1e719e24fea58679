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

// Binary tensor format: uint32 rank, uint32 dims[rank], then row-major
// float64 values. Everything little-endian.

#ifndef HRALIGN_TENSOR_IO_H_
#define HRALIGN_TENSOR_IO_H_

#include <filesystem>
#include <iosfwd>
#include <string_view>
#include <string>

#include "hralign/tensor.h"

namespace hralign {

std::string serialize_tensor(const Tensor& t);
// Parses one tensor starting at `offset`; advances `offset` past it.
Tensor deserialize_tensor(std::string_view bytes, size_t& offset);
Tensor deserialize_tensor(std::string_view bytes);

void save_tensor(const Tensor& t, const std::filesystem::path& path);
Tensor load_tensor(const std::filesystem::path& path);

std::string read_file_bytes(const std::filesystem::path& path);
// Writes to a sibling temporary file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

}  // namespace hralign

#endif  // HRALIGN_TENSOR_IO_H_
