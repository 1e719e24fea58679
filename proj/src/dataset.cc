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

#include "hralign/dataset.h"

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <nlohmann/json.hpp>

#include "hralign/errors.h"
#include "hralign/tensor_io.h"

namespace hralign {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view domain_name(Domain d) { return d == Domain::kHuman ? "human" : "robot"; }

Domain parse_domain(std::string_view name) {
  if (name == "human") return Domain::kHuman;
  if (name == "robot") return Domain::kRobot;
  throw ArgumentError("unknown domain '" + std::string(name) + "'");
}

namespace {

constexpr std::array<const char*, 16> kTaskPhrases = {
    "stack cups",      "open drawer",  "push block left", "pour water",
    "close lid",       "wipe table",   "press button",    "turn knob",
    "pick up sponge",  "slide box right", "lift the cube", "place the can",
    "fold towel",      "insert peg",   "pull handle",     "rotate valve"};

constexpr std::array<const char*, 3> kTemplates = {"{}", "please {}", "{} carefully"};

using Rgb = std::array<double, 3>;

constexpr Rgb kHumanSkin{0.95, 0.74, 0.58};
constexpr Rgb kRobotMetal{0.22, 0.32, 0.92};
constexpr Rgb kWarmBackground{0.86, 0.68, 0.50};
constexpr Rgb kCoolBackground{0.30, 0.36, 0.46};
constexpr Rgb kGridLine{0.62, 0.68, 0.80};
constexpr Rgb kArm{0.55, 0.55, 0.60};

constexpr double kObjectHalfSize = 2.2;

// Per-pair appearance randomness, drawn independently of the gap.
struct Scene {
  size_t grid_dx, grid_dy;
  Rgb object;  // the manipulated object looks the same in both renders
};

std::string fill_template(const char* tmpl, const std::string& phrase) {
  std::string out(tmpl);
  out.replace(out.find("{}"), 2, phrase);
  return out;
}

LatentTrajectory make_trajectory(int task_id, int n_tasks, RngState& rng, size_t& grasp, size_t& release) {
  const double two_pi = 2.0 * std::numbers::pi;
  const double theta = two_pi * task_id / n_tasks + rng.uniform(-0.15, 0.15);
  const double r0 = 0.30 + rng.uniform(-0.04, 0.04);
  const double phi = theta + 2.3 + rng.uniform(-0.3, 0.3);
  const double r1 = 0.30 + rng.uniform(-0.05, 0.05);
  const double bulge = rng.uniform(-0.15, 0.15);
  const double gamma = rng.uniform(0.7, 1.4);
  const size_t len = kMinClipLength + rng.uniform_int(kMaxClipLength - kMinClipLength + 1);
  const double grasp_frac = rng.uniform(0.15, 0.3);
  const double release_frac = rng.uniform(0.8, 0.95);

  const std::array<double, 2> start{0.5 + r0 * std::cos(theta), 0.5 + r0 * std::sin(theta)};
  const std::array<double, 2> goal{0.5 + r1 * std::cos(phi), 0.5 + r1 * std::sin(phi)};
  const double dx = goal[0] - start[0], dy = goal[1] - start[1];
  const double dn = std::max(std::hypot(dx, dy), 1e-9);
  const std::array<double, 2> perp{-dy / dn, dx / dn};

  LatentTrajectory traj;
  traj.task_id = task_id;
  grasp = static_cast<size_t>(std::lround(grasp_frac * static_cast<double>(len - 1)));
  release = static_cast<size_t>(std::lround(release_frac * static_cast<double>(len - 1)));
  for (size_t t = 0; t < len; ++t) {
    const double s = static_cast<double>(t) / static_cast<double>(len - 1);
    const double e = std::pow(s, gamma);
    const double b = bulge * std::sin(std::numbers::pi * e);
    double x = start[0] + e * dx + b * perp[0];
    double y = start[1] + e * dy + b * perp[1];
    x = std::clamp(x, 0.05, 0.95);
    y = std::clamp(y, 0.05, 0.95);
    traj.positions.push_back({x, y});
    traj.gripper_closed.push_back(t >= grasp && t <= release ? 1 : 0);
  }
  return traj;
}

double segment_distance(double px, double py, double ax, double ay, double bx, double by) {
  const double vx = bx - ax, vy = by - ay;
  const double len2 = vx * vx + vy * vy;
  double u = len2 > 0 ? ((px - ax) * vx + (py - ay) * vy) / len2 : 0.0;
  u = std::clamp(u, 0.0, 1.0);
  return std::hypot(px - (ax + u * vx), py - (ay + u * vy));
}

// appearance = 0 is the human renderer; 1 the fully robotic one.
Tensor render_clip(const LatentTrajectory& traj, const Scene& scene, size_t grasp, size_t release,
                   double appearance) {
  const size_t n = kFrameSize, c = kFrameChannels, len = traj.length();
  const double a = appearance;
  std::vector<double> out(len * n * n * c);
  auto lerp = [a](double h, double r) { return h + a * (r - h); };

  for (size_t t = 0; t < len; ++t) {
    const double ex = traj.positions[t][0] * n, ey = traj.positions[t][1] * n;
    // The object rests at the start until grasped, rides with the effector,
    // and stays where it was released.
    size_t carrier = std::min(std::max(t, grasp), release);
    if (t < grasp) carrier = 0;
    const double ox = traj.positions[carrier][0] * n;
    const double oy = traj.positions[carrier][1] * n + (t >= grasp ? 1.0 : 0.0);
    const double shade = traj.gripper_closed[t] ? 0.65 : 1.0;

    for (size_t y = 0; y < n; ++y) {
      for (size_t x = 0; x < n; ++x) {
        const double px = x + 0.5, py = y + 0.5;
        const double tex =
            0.5 + 0.25 * (std::sin(0.9 * px + 1.0) + std::sin(0.7 * py + 0.3 * px + 2.0)) * std::cos(0.3 * py);
        const bool grid = (x + scene.grid_dx) % 4 == 0 || (y + scene.grid_dy) % 4 == 0;
        const double obj_mask =
            (std::abs(px - ox) <= kObjectHalfSize && std::abs(py - oy) <= kObjectHalfSize) ? 1.0 : 0.0;
        const double arm_mask = std::max(0.0, 1.0 - segment_distance(px, py, 8.0, 17.0, ex, ey) / 0.8);
        const double dxe = px - ex, dye = py - ey;
        const double round_mask = std::exp(-(dxe * dxe + dye * dye) / (2.0 * 1.3 * 1.3));
        const double square_mask = (std::abs(dxe) <= 1.7 && std::abs(dye) <= 1.7) ? 1.0 : 0.0;
        const double eff_mask = lerp(round_mask, square_mask);
        const double arm_alpha = a * arm_mask;

        for (size_t ch = 0; ch < c; ++ch) {
          double v = lerp(kWarmBackground[ch] * (0.75 + 0.25 * tex), grid ? kGridLine[ch] : kCoolBackground[ch]);
          v += arm_alpha * (kArm[ch] - v);
          v += eff_mask * (shade * lerp(kHumanSkin[ch], kRobotMetal[ch]) - v);
          // Drawn last so a carried object stays visible over the effector.
          v += obj_mask * (scene.object[ch] - v);
          out[((t * n + y) * n + x) * c + ch] = std::clamp(v, 0.0, 1.0);
        }
      }
    }
  }
  return Tensor({len, n, n, c}, std::move(out));
}

}  // namespace

std::string task_phrase(int task_id) {
  if (task_id < 0) throw ArgumentError("task id must be non-negative");
  if (static_cast<size_t>(task_id) < kTaskPhrases.size()) return kTaskPhrases[task_id];
  return "task " + std::to_string(task_id) + " motion";
}

std::vector<PairedDemo> generate_paired_set(RngState& rng, int n_tasks, int pairs_per_task, double gap,
                                            int first_pair_id) {
  if (n_tasks < 2) throw ArgumentError("generate_paired_set: n_tasks must be >= 2");
  if (pairs_per_task < 1) throw ArgumentError("generate_paired_set: pairs_per_task must be >= 1");
  if (!(gap >= 0.0 && gap <= 1.0)) throw ArgumentError("generate_paired_set: gap must lie in [0, 1]");

  std::vector<PairedDemo> set;
  set.reserve(static_cast<size_t>(n_tasks) * pairs_per_task);
  for (int task = 0; task < n_tasks; ++task) {
    for (int j = 0; j < pairs_per_task; ++j) {
      const int pair_id = first_pair_id + task * pairs_per_task + j;
      size_t grasp = 0, release = 0;
      LatentTrajectory traj = make_trajectory(task, n_tasks, rng, grasp, release);
      Scene scene{};
      scene.grid_dx = rng.uniform_int(4);
      scene.grid_dy = rng.uniform_int(4);
      for (double& v : scene.object) v = rng.uniform(0.05, 0.95);
      const char* tmpl = kTemplates[rng.uniform_int(kTemplates.size())];

      PairedDemo demo;
      demo.description = {fill_template(tmpl, task_phrase(task)), task};
      demo.human = {render_clip(traj, scene, grasp, release, 0.0), Domain::kHuman, task, pair_id};
      demo.robot = {render_clip(traj, scene, grasp, release, gap), Domain::kRobot, task, pair_id};
      demo.latent = std::move(traj);
      set.push_back(std::move(demo));
    }
  }
  return set;
}

double mean_pair_pixel_difference(const std::vector<PairedDemo>& set) {
  if (set.empty()) return 0.0;
  double total = 0.0;
  for (const auto& p : set) {
    auto h = p.human.frames.data();
    auto r = p.robot.frames.data();
    if (h.size() != r.size()) throw DimensionError("pair clips differ in size");
    double acc = 0.0;
    for (size_t i = 0; i < h.size(); ++i) acc += std::abs(h[i] - r[i]);
    total += acc / static_cast<double>(h.size());
  }
  return total / static_cast<double>(set.size());
}

std::vector<size_t> sample_frame_indices(size_t length, size_t count, RngState& rng) {
  if (count == 0) throw ArgumentError("sample_frames: frame count must be >= 1");
  if (length == 0) throw ArgumentError("sample_frames: clip is empty");
  std::vector<size_t> out;
  out.reserve(count);
  if (length >= count) {
    std::vector<size_t> pool(length);
    for (size_t i = 0; i < length; ++i) pool[i] = i;
    for (size_t i = 0; i < count; ++i) {
      const size_t j = i + rng.uniform_int(length - i);
      std::swap(pool[i], pool[j]);
      out.push_back(pool[i]);
    }
  } else {
    for (size_t i = 0; i < count; ++i) out.push_back(rng.uniform_int(length));
  }
  std::sort(out.begin(), out.end());
  return out;
}

Tensor sample_frames(const VideoClip& clip, size_t count, RngState& rng) {
  const auto idx = sample_frame_indices(clip.length(), count, rng);
  return index_select(clip.frames, idx);
}

std::vector<VideoClip> human_clips(const std::vector<PairedDemo>& set) {
  std::vector<VideoClip> out;
  for (const auto& p : set) out.push_back(p.human);
  return out;
}

std::vector<VideoClip> robot_clips(const std::vector<PairedDemo>& set) {
  std::vector<VideoClip> out;
  for (const auto& p : set) out.push_back(p.robot);
  return out;
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw IoError("sha256 computation failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xF]);
  }
  return out;
}

namespace {

std::string clip_filename(int pair_id, Domain d) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "clips/pair_%06d_%s.tensor", pair_id, std::string(domain_name(d)).c_str());
  return buf;
}

}  // namespace

void save_manifest(const std::vector<PairedDemo>& set, const fs::path& manifest_path) {
  const fs::path dir = manifest_path.has_parent_path() ? manifest_path.parent_path() : fs::path(".");
  fs::create_directories(dir / "clips");
  json pairs = json::array();
  for (const auto& p : set) {
    json entry;
    entry["pair_id"] = p.human.pair_id;
    entry["task_id"] = p.description.task_id;
    entry["description"] = p.description.text;
    for (const VideoClip* clip : {&p.human, &p.robot}) {
      const std::string name(domain_name(clip->domain));
      const std::string rel = clip_filename(clip->pair_id, clip->domain);
      const std::string bytes = serialize_tensor(clip->frames);
      write_file_atomic(dir / rel, bytes);
      entry[name + "_file"] = rel;
      entry[name + "_len"] = clip->length();
      entry[name + "_sha256"] = sha256_hex(bytes);
    }
    if (p.latent) {
      json pos = json::array();
      for (const auto& xy : p.latent->positions) pos.push_back({xy[0], xy[1]});
      entry["trajectory"] = {{"positions", pos}, {"gripper", p.latent->gripper_closed}};
    }
    pairs.push_back(std::move(entry));
  }
  const json doc = {{"version", 1},
                    {"frame_shape", {kFrameSize, kFrameSize, kFrameChannels}},
                    {"pairs", std::move(pairs)}};
  write_file_atomic(manifest_path, doc.dump(1) + "\n");
}

std::vector<PairedDemo> load_manifest(const fs::path& manifest_path) {
  const fs::path dir = manifest_path.has_parent_path() ? manifest_path.parent_path() : fs::path(".");
  json doc;
  try {
    doc = json::parse(read_file_bytes(manifest_path));
  } catch (const json::exception& e) {
    throw LoadError(manifest_path.string() + ": malformed manifest: " + e.what());
  } catch (const IoError& e) {
    throw LoadError(std::string("cannot read manifest: ") + e.what());
  }

  std::vector<PairedDemo> set;
  try {
    if (doc.at("version").get<int>() != 1) throw LoadError(manifest_path.string() + ": unsupported manifest version");
    const auto shape = doc.at("frame_shape").get<std::vector<size_t>>();
    if (shape.size() != 3) throw LoadError(manifest_path.string() + ": frame_shape must have three entries");
    for (const auto& entry : doc.at("pairs")) {
      PairedDemo demo;
      const int pair_id = entry.at("pair_id").get<int>();
      const int task_id = entry.at("task_id").get<int>();
      demo.description = {entry.at("description").get<std::string>(), task_id};
      for (Domain d : {Domain::kHuman, Domain::kRobot}) {
        const std::string name(domain_name(d));
        const std::string rel = entry.at(name + "_file").get<std::string>();
        const size_t len = entry.at(name + "_len").get<size_t>();
        const fs::path file = dir / rel;
        const std::string where = "pair " + std::to_string(pair_id) + " " + name + " clip " + file.string();
        if (!fs::exists(file)) throw LoadError(where + ": file not found");
        const std::string bytes = read_file_bytes(file);
        if (sha256_hex(bytes) != entry.at(name + "_sha256").get<std::string>()) {
          throw LoadError(where + ": checksum mismatch");
        }
        Tensor frames;
        try {
          frames = deserialize_tensor(bytes);
        } catch (const LoadError& e) {
          throw LoadError(where + ": " + e.what());
        }
        const Shape expected{len, shape[0], shape[1], shape[2]};
        if (frames.shape() != expected) {
          throw LoadError(where + ": shape " + shape_str(frames.shape()) + " does not match manifest " +
                          shape_str(expected));
        }
        VideoClip clip{std::move(frames), d, task_id, pair_id};
        (d == Domain::kHuman ? demo.human : demo.robot) = std::move(clip);
      }
      if (entry.contains("trajectory")) {
        LatentTrajectory traj;
        traj.task_id = task_id;
        for (const auto& xy : entry["trajectory"].at("positions")) {
          traj.positions.push_back({xy.at(0).get<double>(), xy.at(1).get<double>()});
        }
        traj.gripper_closed = entry["trajectory"].at("gripper").get<std::vector<uint8_t>>();
        if (traj.gripper_closed.size() != traj.positions.size()) {
          throw LoadError("pair " + std::to_string(pair_id) + ": trajectory arrays differ in length");
        }
        demo.latent = std::move(traj);
      }
      set.push_back(std::move(demo));
    }
  } catch (const json::exception& e) {
    throw LoadError(manifest_path.string() + ": malformed manifest: " + e.what());
  }
  return set;
}

}  // namespace hralign
