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

#include "hralign/rng.h"

#include <cmath>
#include <numbers>
#include <numeric>

#include "hralign/errors.h"

namespace hralign {

namespace {
constexpr uint64_t kGamma = 0x9E3779B97F4A7C15ULL;
}  // namespace

uint64_t splitmix64(uint64_t x) {
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

uint64_t RngState::next_u64() {
  ++position;
  return splitmix64(seed * kGamma + position * kGamma + 0x632BE59BD9B4E019ULL);
}

double RngState::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngState::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

uint64_t RngState::uniform_int(uint64_t n) {
  if (n == 0) throw ArgumentError("uniform_int: range must be positive");
  // Lemire's multiply-shift with rejection.
  unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * n;
  auto low = static_cast<uint64_t>(m);
  if (low < n) {
    const uint64_t threshold = (0 - n) % n;
    while (low < threshold) {
      m = static_cast<unsigned __int128>(next_u64()) * n;
      low = static_cast<uint64_t>(m);
    }
  }
  return static_cast<uint64_t>(m >> 64);
}

double RngState::normal() {
  // Box-Muller; u1 kept away from zero.
  const double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

RngState RngState::fork(uint64_t tag) const {
  return RngState(splitmix64(seed ^ splitmix64(tag + kGamma)), 0);
}

std::vector<size_t> shuffled_indices(size_t n, RngState& rng) {
  std::vector<size_t> idx(n);
  std::iota(idx.begin(), idx.end(), size_t{0});
  for (size_t i = n; i > 1; --i) {
    const size_t j = rng.uniform_int(i);
    std::swap(idx[i - 1], idx[j]);
  }
  return idx;
}

}  // namespace hralign
