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

// Procedurally generated paired human/robot demonstration clips, frame
// sampling, and the on-disk manifest format.

#ifndef HRALIGN_DATASET_H_
#define HRALIGN_DATASET_H_

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hralign/rng.h"
#include "hralign/task_query.h"
#include "hralign/tensor.h"

namespace hralign {

enum class Domain { kHuman, kRobot };

std::string_view domain_name(Domain d);
Domain parse_domain(std::string_view name);

inline constexpr size_t kFrameSize = 16;
inline constexpr size_t kFrameChannels = 3;
inline constexpr size_t kMinClipLength = 8;
inline constexpr size_t kMaxClipLength = 24;

struct VideoClip {
  Tensor frames;  // T_len × H × W × C, values in [0, 1]
  Domain domain = Domain::kHuman;
  int task_id = 0;
  int pair_id = 0;

  size_t length() const { return frames.dim(0); }
};

// Effector path in the unit square shared by both renders of a pair.
struct LatentTrajectory {
  int task_id = 0;
  std::vector<std::array<double, 2>> positions;
  std::vector<uint8_t> gripper_closed;

  size_t length() const { return positions.size(); }
};

struct PairedDemo {
  VideoClip human;
  VideoClip robot;
  TaskDescription description;
  std::optional<LatentTrajectory> latent;
};

// Base phrase for a task id ("stack cups", "open drawer", ...).
std::string task_phrase(int task_id);

// Deterministic given `rng`. `gap` in [0, 1] blends the robot renderer's
// appearance away from the human renderer's; gap = 0 yields identical clips.
std::vector<PairedDemo> generate_paired_set(RngState& rng, int n_tasks, int pairs_per_task,
                                            double gap, int first_pair_id = 0);

// Mean over pairs of the mean absolute pixel difference between the human and
// robot clip of a pair.
double mean_pair_pixel_difference(const std::vector<PairedDemo>& set);

// Sorted frame indices: without replacement when length >= count, otherwise
// with replacement.
std::vector<size_t> sample_frame_indices(size_t length, size_t count, RngState& rng);
Tensor sample_frames(const VideoClip& clip, size_t count, RngState& rng);

std::vector<VideoClip> human_clips(const std::vector<PairedDemo>& set);
std::vector<VideoClip> robot_clips(const std::vector<PairedDemo>& set);

std::string sha256_hex(std::string_view bytes);

// Manifest JSON plus one tensor file per clip under <dir>/clips/.
void save_manifest(const std::vector<PairedDemo>& set, const std::filesystem::path& manifest_path);
std::vector<PairedDemo> load_manifest(const std::filesystem::path& manifest_path);

}  // namespace hralign

#endif  // HRALIGN_DATASET_H_
