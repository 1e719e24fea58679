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

#include <gtest/gtest.h>

#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

#include "hralign/checkpoint.h"
#include "hralign/cli.h"
#include "hralign/dataset.h"
#include "hralign/tensor_io.h"
#include "test_util.h"

namespace hralign {
namespace {

namespace fs = std::filesystem;
using testing::TempDir;

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run(std::vector<std::string> args) {
  args.insert(args.begin(), "hralign");
  std::ostringstream out, err;
  const int code = cli_main(args, out, err);
  return {code, out.str(), err.str()};
}

// Every file listed in artifacts.json exists and matches its digest.
void expect_artifacts(const fs::path& dir, const std::vector<std::string>& required) {
  ASSERT_TRUE(fs::exists(dir / "artifacts.json")) << dir;
  ASSERT_TRUE(fs::exists(dir / "resolved_config.txt")) << dir;
  const auto doc = nlohmann::json::parse(read_file_bytes(dir / "artifacts.json"));
  std::set<std::string> listed;
  for (const auto& f : doc.at("files")) {
    const fs::path p = dir / f.at("path").get<std::string>();
    ASSERT_TRUE(fs::exists(p)) << p;
    EXPECT_EQ(sha256_hex(read_file_bytes(p)), f.at("sha256").get<std::string>()) << p;
    listed.insert(f.at("path").get<std::string>());
  }
  for (const auto& name : required) EXPECT_TRUE(listed.count(name)) << dir << " lacks " << name;
}

TEST(Cli, HelpExitsZero) {
  const Outcome o = run({"adapt", "--help"});
  EXPECT_EQ(o.code, kExitOk);
  EXPECT_NE(o.out.find("--config"), std::string::npos);
}

TEST(Cli, UnknownSubcommandIsUsageError) {
  const Outcome o = run({"frobnicate"});
  EXPECT_EQ(o.code, kExitUsage);
  EXPECT_FALSE(o.err.empty());
  EXPECT_EQ(run({}).code, kExitUsage);
  EXPECT_EQ(run({"adapt", "--no-such-flag"}).code, kExitUsage);
}

TEST(Cli, MissingConfigNamesPath) {
  const Outcome o = run({"adapt", "-c", "/no/such/dir/ref.cfg"});
  EXPECT_EQ(o.code, kExitUsage);
  EXPECT_NE(o.err.find("/no/such/dir/ref.cfg"), std::string::npos) << o.err;
}

TEST(Cli, UnknownOrMalformedKeyIsUsageError) {
  TempDir dir("cli_badkey");
  write_file_atomic(dir.path() / "a.cfg", "stepz = 3\n");
  EXPECT_EQ(run({"adapt", "-c", (dir.path() / "a.cfg").string()}).code, kExitUsage);
  EXPECT_EQ(run({"adapt", "--set", "steps=many"}).code, kExitUsage);
  EXPECT_EQ(run({"adapt", "--set", "steps"}).code, kExitUsage);
  EXPECT_EQ(run({"generate", "--set", "gap=1.5"}).code, kExitUsage);
}

TEST(Cli, MissingInputIsRuntimeError) {
  TempDir dir("cli_runtime");
  const Outcome o = run({"adapt", "-o", (dir.path() / "a").string(), "--set",
                         "data=" + (dir.path() / "absent.json").string()});
  EXPECT_EQ(o.code, kExitRuntime);
  EXPECT_NE(o.err.find("absent.json"), std::string::npos) << o.err;
}

TEST(Cli, SmallPipelineProducesDeclaredArtifacts) {
  TempDir dir("cli_pipeline");
  const fs::path root = dir.path();
  const std::string cfg = (root / "small.cfg").string();
  write_file_atomic(cfg,
                    "# small pipeline\nn_tasks = 2\npairs_per_task = 4\nheldout_pairs_per_task = 4\n"
                    "pretrain_epochs = 1\nbatch_size = 4\nsteps = 3\nlearning_rate = 1e-2\n");
  auto at = [&root](const std::string& p) { return (root / p).string(); };
  const std::vector<std::string> inputs{"--set", "data=" + at("data/train/manifest.json"),
                                        "--set", "heldout=" + at("data/heldout/manifest.json"),
                                        "--set", "backbone=" + at("pre/backbone.ckpt")};
  auto step = [&](std::vector<std::string> args) {
    args.insert(args.end(), {"-c", cfg});
    args.insert(args.end(), inputs.begin(), inputs.end());
    const Outcome o = run(args);
    EXPECT_EQ(o.code, kExitOk) << args[0] << ": " << o.err;
    return o;
  };

  step({"generate", "-o", at("data")});
  expect_artifacts(root / "data", {"train/manifest.json", "heldout/manifest.json", "pixel_gap.txt"});
  EXPECT_EQ(load_manifest(root / "data/train/manifest.json").size(), 8u);
  EXPECT_EQ(load_manifest(root / "data/heldout/manifest.json").front().human.pair_id, 100000);

  step({"pretrain", "-o", at("pre")});
  expect_artifacts(root / "pre", {"backbone.ckpt", "pretrain_losses.csv"});

  step({"adapt", "-o", at("adapt")});
  expect_artifacts(root / "adapt", {"model.ckpt", "metrics.csv", "summary.json", "run_notes.txt"});
  EXPECT_EQ(MetricsLog::from_csv(read_file_bytes(root / "adapt/metrics.csv")).records.size(), 3u);
  EXPECT_NE(read_file_bytes(root / "adapt/resolved_config.txt").find("learning_rate = 0.01"), std::string::npos);

  for (const char* kind : {"pret", "cls"}) {
    const std::string out = std::string("base_") + kind;
    step({"baseline", kind, "-o", at(out)});
    expect_artifacts(root / out, {"model.ckpt", "metrics.csv", "summary.json"});
    const auto summary = nlohmann::json::parse(read_file_bytes(root / out / "summary.json"));
    EXPECT_EQ(summary.at("learned_params"), 14336);
  }

  step({"eval", "-o", at("eval"), "--set", "checkpoint=" + at("adapt/model.ckpt")});
  expect_artifacts(root / "eval", {"report.json", "report.txt"});
  const auto report = nlohmann::json::parse(read_file_bytes(root / "eval/report.json"));
  EXPECT_TRUE(report.contains("adapted"));
  EXPECT_TRUE(report.contains("frozen"));

  step({"dump", "-o", at("dump"), "--set", "checkpoint=" + at("adapt/model.ckpt")});
  expect_artifacts(root / "dump", {"embeddings.csv"});

  step({"ablate", "-o", at("abl"), "--set", "steps=1"});
  expect_artifacts(root / "abl", {"ablation.tsv", "ablation.json", "E/model.ckpt", "L-nolang/metrics.csv"});
  EXPECT_EQ(nlohmann::json::parse(read_file_bytes(root / "abl/ablation.json")).size(), 5u);
}

TEST(Cli, ResumeContinuesMetricsAndMatchesFullRun) {
  TempDir dir("cli_resume");
  const fs::path root = dir.path();
  auto at = [&root](const std::string& p) { return (root / p).string(); };
  const std::vector<std::string> small{"--set", "n_tasks=2", "--set", "pairs_per_task=4", "--set", "batch_size=4",
                                       "--set", "pretrain_epochs=0", "--set", "learning_rate=1e-2"};
  auto with = [&small](std::vector<std::string> a) {
    a.insert(a.end(), small.begin(), small.end());
    return a;
  };
  const std::string data = "data=" + at("data/train/manifest.json");
  const std::string bb = "backbone=" + at("pre/backbone.ckpt");
  ASSERT_EQ(run(with({"generate", "-o", at("data")})).code, kExitOk);
  ASSERT_EQ(run(with({"pretrain", "-o", at("pre"), "--set", data})).code, kExitOk);
  ASSERT_EQ(run(with({"adapt", "-o", at("full"), "--set", data, "--set", bb, "--set", "steps=4"})).code, kExitOk);
  ASSERT_EQ(run(with({"adapt", "-o", at("half"), "--set", data, "--set", bb, "--set", "steps=2"})).code, kExitOk);
  ASSERT_EQ(run(with({"adapt", "-o", at("rest"), "--set", data, "--set", bb, "--set", "steps=4", "--resume",
                      at("half/model.ckpt")}))
                .code,
            kExitOk);
  EXPECT_TRUE(checkpoints_equal(load_checkpoint(root / "full/model.ckpt"), load_checkpoint(root / "rest/model.ckpt")));
  const MetricsLog full = MetricsLog::from_csv(read_file_bytes(root / "full/metrics.csv"));
  const MetricsLog rest = MetricsLog::from_csv(read_file_bytes(root / "rest/metrics.csv"));
  EXPECT_TRUE(full.same_trajectory(rest));
}

}  // namespace
}  // namespace hralign
