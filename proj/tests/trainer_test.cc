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

#include <cmath>
#include <set>

#include "hralign/errors.h"
#include "hralign/tensor_io.h"
#include "hralign/trainer.h"
#include "test_util.h"

namespace hralign {
namespace {

using testing::bitwise_equal;
using testing::TempDir;

class TrainerTest : public ::testing::Test {
 protected:
  void SetUp() override {
    data_ = testing::small_set(21, 2, 4);
    RngState rng(22);
    backbone_ = Backbone::create(rng);
  }

  TrainConfig hr_config(size_t steps) const {
    TrainConfig c;
    c.batch_size = 4;
    c.steps = steps;
    c.learning_rate = 1e-2;
    c.seed = 5;
    return c;
  }

  TrainConfig baseline_config(Method m, size_t steps) const {
    TrainConfig c = hr_config(steps);
    c.method = m;
    c.learning_rate = 1e-3;
    return c;
  }

  std::vector<PairedDemo> data_;
  Backbone backbone_;
};

TEST_F(TrainerTest, ZeroStepsReturnsInitialization) {
  const TrainConfig c = hr_config(0);
  const TrainResult r = train(c, data_, backbone_);
  EXPECT_TRUE(r.metrics.records.empty());
  EXPECT_TRUE(checkpoints_equal(r.checkpoint, initial_checkpoint(c, backbone_)));
  EXPECT_EQ(r.checkpoint.step, 0u);
}

TEST_F(TrainerTest, SameSeedSameRun) {
  const TrainConfig c = hr_config(6);
  const TrainResult a = train(c, data_, backbone_);
  const TrainResult b = train(c, data_, backbone_);
  EXPECT_TRUE(checkpoints_equal(a.checkpoint, b.checkpoint));
  EXPECT_TRUE(a.metrics.same_trajectory(b.metrics));
  EXPECT_EQ(a.metrics.records.size(), 6u);
}

TEST_F(TrainerTest, DifferentSeedDifferentRun) {
  TrainConfig c = hr_config(3);
  const TrainResult a = train(c, data_, backbone_);
  c.seed = 6;
  const TrainResult b = train(c, data_, backbone_);
  EXPECT_FALSE(checkpoints_equal(a.checkpoint, b.checkpoint));
}

TEST_F(TrainerTest, ResumeMatchesUninterruptedRun) {
  const TrainResult full = train(hr_config(7), data_, backbone_);
  const TrainResult first = train(hr_config(3), data_, backbone_);
  TempDir dir("trainer_resume");
  save_checkpoint(first.checkpoint, dir.path() / "k.ckpt");
  const ModelCheckpoint loaded = load_checkpoint(dir.path() / "k.ckpt");
  const TrainResult rest = train(hr_config(7), data_, backbone_, &loaded);
  EXPECT_TRUE(checkpoints_equal(rest.checkpoint, full.checkpoint));
  MetricsLog joined = first.metrics;
  joined.append(rest.metrics);
  EXPECT_TRUE(joined.same_trajectory(full.metrics));
}

TEST_F(TrainerTest, ResumeAcrossEpochBoundary) {
  // 8 pairs, batch 4: two steps per epoch.
  const TrainResult full = train(hr_config(5), data_, backbone_);
  for (size_t k : {1u, 2u, 4u}) {
    const TrainResult first = train(hr_config(k), data_, backbone_);
    const TrainResult rest = train(hr_config(5), data_, backbone_, &first.checkpoint);
    EXPECT_TRUE(checkpoints_equal(rest.checkpoint, full.checkpoint)) << "k=" << k;
  }
}

TEST_F(TrainerTest, ResumeRejectsDifferentConfiguration) {
  const TrainResult first = train(hr_config(2), data_, backbone_);
  TrainConfig other = hr_config(4);
  other.temperature = 0.2;
  EXPECT_THROW(train(other, data_, backbone_, &first.checkpoint), ArgumentError);
  TrainConfig longer = hr_config(4);
  longer.output_dir = "elsewhere";
  EXPECT_NO_THROW(train(longer, data_, backbone_, &first.checkpoint));
  EXPECT_THROW(train(hr_config(1), data_, backbone_, &first.checkpoint), ArgumentError);
}

TEST_F(TrainerTest, BackboneNeverChanges) {
  const std::vector<Tensor> before = backbone_.clone().parameters();
  size_t calls = 0;
  const StepHook hook = [&](const ModelCheckpoint& ck, const MetricsRecord&) {
    ++calls;
    EXPECT_TRUE(same_weights(ck.backbone.parameters(), before));
    for (const Tensor& p : ck.backbone.parameters()) EXPECT_FALSE(p.requires_grad());
  };
  TrainConfig c = hr_config(4);
  c.adapter_positions = "EML";
  const TrainResult r = train(c, data_, backbone_, nullptr, hook);
  EXPECT_EQ(calls, 4u);
  EXPECT_TRUE(same_weights(r.checkpoint.backbone.parameters(), before));
  EXPECT_TRUE(same_weights(backbone_.parameters(), before));
}

TEST_F(TrainerTest, OnlyAdaptersAndProjectionAreLearnable) {
  TrainConfig c = hr_config(3);
  const ModelCheckpoint init = initial_checkpoint(c, backbone_);
  const TrainResult r = train(c, data_, backbone_);
  const auto& ck = r.checkpoint;
  EXPECT_EQ(ck.learnable_parameters().size(), ck.adapters.parameters().size() + 2);
  EXPECT_FALSE(same_weights(ck.adapters.parameters(), init.adapters.parameters()));
  EXPECT_FALSE(bitwise_equal(ck.query->projection(), init.query->projection()));
  EXPECT_TRUE(bitwise_equal(ck.query->table(), init.query->table()));
  EXPECT_EQ(ck.learned_parameter_count(), 552u);
  EXPECT_EQ(ck.head_parameter_count(), 32u * 64u + 32u);
}

TEST_F(TrainerTest, NoLanguageLeavesProjectionAtInit) {
  TrainConfig c = hr_config(3);
  c.use_language = false;
  const ModelCheckpoint init = initial_checkpoint(c, backbone_);
  const TrainResult r = train(c, data_, backbone_);
  EXPECT_TRUE(bitwise_equal(r.checkpoint.query->projection(), init.query->projection()));
  EXPECT_FALSE(same_weights(r.checkpoint.adapters.parameters(), init.adapters.parameters()));
}

TEST_F(TrainerTest, LossIsPositiveAndFinite) {
  const TrainResult r = train(hr_config(8), data_, backbone_);
  for (const auto& rec : r.metrics.records) {
    EXPECT_TRUE(std::isfinite(rec.loss));
    EXPECT_GT(rec.loss, 0.0);
    EXPECT_GE(rec.pos_sim, -1.0 - 1e-12);
    EXPECT_LE(rec.pos_sim, 1.0 + 1e-12);
  }
  for (size_t i = 0; i < r.metrics.records.size(); ++i) EXPECT_EQ(r.metrics.records[i].step, i + 1);
}

TEST_F(TrainerTest, RejectsOversizedBatchAndEmptyData) {
  TrainConfig c = hr_config(1);
  c.batch_size = 9;
  EXPECT_THROW(train(c, data_, backbone_), ArgumentError);
  EXPECT_THROW(train(hr_config(1), {}, backbone_), ArgumentError);
}

TEST_F(TrainerTest, RejectsUnfrozenBackbone) {
  Backbone b = backbone_.clone();
  b.set_frozen(false);
  EXPECT_THROW(train(hr_config(1), data_, b), ArgumentError);
}

TEST_F(TrainerTest, PretBaselineZeroStepsKeepsBackbone) {
  const TrainResult r = train(baseline_config(Method::kPretBaseline, 0), data_, backbone_);
  EXPECT_TRUE(same_weights(r.checkpoint.backbone.parameters(), backbone_.parameters()));
  EXPECT_TRUE(r.metrics.records.empty());
}

TEST_F(TrainerTest, PretBaselineUpdatesWholeBackbone) {
  const TrainResult r = train(baseline_config(Method::kPretBaseline, 2), data_, backbone_);
  const auto after = r.checkpoint.backbone.parameters(), before = backbone_.parameters();
  for (size_t i = 0; i < after.size(); ++i) EXPECT_FALSE(bitwise_equal(after[i], before[i])) << i;
  EXPECT_EQ(r.checkpoint.learned_parameter_count(), 14336u);
  EXPECT_FALSE(r.checkpoint.query.has_value());
}

TEST_F(TrainerTest, PretBaselineAdapterModeFreezesBackbone) {
  TrainConfig c = baseline_config(Method::kPretBaseline, 2);
  c.baseline_learnable = "adapter";
  const TrainResult r = train(c, data_, backbone_);
  EXPECT_TRUE(same_weights(r.checkpoint.backbone.parameters(), backbone_.parameters()));
  EXPECT_EQ(r.checkpoint.learned_parameter_count(), 552u);
}

TEST_F(TrainerTest, ClsBaselineRejectsSingleClass) {
  std::vector<PairedDemo> one_task;
  for (const auto& p : data_) {
    if (p.description.task_id == 0) one_task.push_back(p);
  }
  EXPECT_THROW(train(baseline_config(Method::kClsBaseline, 1), one_task, backbone_), ArgumentError);
}

TEST_F(TrainerTest, ClsBaselineTrainsHeadAndReportsAccuracy) {
  const TrainResult r = train(baseline_config(Method::kClsBaseline, 4), data_, backbone_);
  ASSERT_TRUE(r.checkpoint.head.has_value());
  EXPECT_EQ(r.checkpoint.head->weight.dim(0), 2u);
  EXPECT_GE(r.final_accuracy, 0.0);
  EXPECT_LE(r.final_accuracy, 1.0);
  EXPECT_EQ(r.metrics.records.size(), 4u);
  const TrainResult again = train(baseline_config(Method::kClsBaseline, 4), data_, backbone_);
  EXPECT_TRUE(checkpoints_equal(r.checkpoint, again.checkpoint));
}

TEST_F(TrainerTest, BaselineResumeMatchesUninterruptedRun) {
  for (Method m : {Method::kPretBaseline, Method::kClsBaseline}) {
    const TrainResult full = train(baseline_config(m, 4), data_, backbone_);
    const TrainResult first = train(baseline_config(m, 1), data_, backbone_);
    const TrainResult rest = train(baseline_config(m, 4), data_, backbone_, &first.checkpoint);
    EXPECT_TRUE(checkpoints_equal(rest.checkpoint, full.checkpoint)) << method_name(m);
  }
}

TEST_F(TrainerTest, CheckpointRoundTripIsBitwise) {
  TempDir dir("trainer_ckpt");
  for (Method m : {Method::kHrAlign, Method::kPretBaseline, Method::kClsBaseline}) {
    const TrainResult r = train(m == Method::kHrAlign ? hr_config(2) : baseline_config(m, 2), data_, backbone_);
    const auto path = dir.path() / "m.ckpt";
    save_checkpoint(r.checkpoint, path);
    const ModelCheckpoint back = load_checkpoint(path);
    EXPECT_TRUE(checkpoints_equal(back, r.checkpoint)) << method_name(m);
    EXPECT_EQ(back.config, r.checkpoint.config);
  }
}

TEST_F(TrainerTest, TruncatedCheckpointFailsToLoad) {
  TempDir dir("trainer_trunc");
  const auto path = dir.path() / "m.ckpt";
  save_checkpoint(train(hr_config(1), data_, backbone_).checkpoint, path);
  const std::string bytes = read_file_bytes(path);
  write_file_atomic(path, bytes.substr(0, bytes.size() - 100));
  EXPECT_THROW(load_checkpoint(path), LoadError);
  EXPECT_THROW(load_checkpoint(dir.path() / "absent.ckpt"), LoadError);
}

TEST_F(TrainerTest, BackboneFileRoundTrip) {
  TempDir dir("trainer_backbone");
  save_backbone(backbone_, dir.path() / "b.ckpt");
  const Backbone back = load_backbone(dir.path() / "b.ckpt");
  EXPECT_TRUE(same_weights(back.parameters(), backbone_.parameters()));
  EXPECT_TRUE(back.frozen());
}

TEST(MetricsLog, CsvRoundTrip) {
  MetricsLog log;
  log.records = {{1, 0.75, 0.5, 0.25, 3.5}, {2, 1.0 / 3.0, -0.125, 0.1, 2.0}};
  const std::string csv = log.to_csv();
  EXPECT_EQ(csv.substr(0, csv.find('\n')), kMetricsHeader);
  const MetricsLog back = MetricsLog::from_csv(csv);
  ASSERT_EQ(back.records.size(), 2u);
  EXPECT_TRUE(back.same_trajectory(log));
  EXPECT_EQ(back.records[1].loss, 1.0 / 3.0);
  EXPECT_THROW(MetricsLog::from_csv("step,loss\n1,2\n"), LoadError);
}

TEST(MetricsLog, AppendRequiresIncreasingSteps) {
  MetricsLog a, b;
  a.records = {{1, 1, 0, 0, 0}, {2, 1, 0, 0, 0}};
  b.records = {{2, 1, 0, 0, 0}};
  EXPECT_THROW(a.append(b), ArgumentError);
}

TEST(EpochOrder, IsPermutationVaryingByEpoch) {
  const auto a = epoch_order(7, 0, 20), b = epoch_order(7, 1, 20);
  EXPECT_EQ(std::set<size_t>(a.begin(), a.end()).size(), 20u);
  EXPECT_EQ(*std::max_element(a.begin(), a.end()), 19u);
  EXPECT_NE(a, b);
  EXPECT_EQ(a, epoch_order(7, 0, 20));
}

TEST(TrainConfig, HashIgnoresStepsAndOutput) {
  TrainConfig a, b;
  b.steps = 10;
  b.output_dir = "x";
  EXPECT_EQ(a.trajectory_hash(), b.trajectory_hash());
  b.learning_rate = 2e-4;
  EXPECT_NE(a.trajectory_hash(), b.trajectory_hash());
}

TEST(TrainConfig, TextRoundTrip) {
  TrainConfig a;
  a.adapter_positions = "EML";
  a.learning_rate = 0.1 + 0.2;
  a.use_language = false;
  TrainConfig b;
  for (const auto& [k, v] : parse_key_values(a.to_text())) ASSERT_TRUE(b.set(k, v)) << k;
  EXPECT_EQ(a, b);
  EXPECT_FALSE(b.set("no_such_key", "1"));
  EXPECT_THROW(b.set("steps", "-3"), ArgumentError);
}

}  // namespace
}  // namespace hralign
