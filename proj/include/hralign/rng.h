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

#ifndef HRALIGN_RNG_H_
#define HRALIGN_RNG_H_

#include <cstddef>
#include <cstdint>
#include <vector>

namespace hralign {

// Counter-based generator: draw n is a pure function of (seed, n), so the
// pair (seed, position) fully determines the rest of the stream.
struct RngState {
  uint64_t seed = 0;
  uint64_t position = 0;

  RngState() = default;
  explicit RngState(uint64_t s, uint64_t pos = 0) : seed(s), position(pos) {}

  uint64_t next_u64();
  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi);
  // Unbiased integer in [0, n). n must be positive.
  uint64_t uniform_int(uint64_t n);
  double normal();

  // Independent child stream; does not advance this one.
  RngState fork(uint64_t tag) const;

  bool operator==(const RngState&) const = default;
};

uint64_t splitmix64(uint64_t x);

// Fisher-Yates permutation of [0, n).
std::vector<size_t> shuffled_indices(size_t n, RngState& rng);

}  // namespace hralign

#endif  // HRALIGN_RNG_H_
