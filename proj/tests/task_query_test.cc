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

#include "hralign/errors.h"
#include "hralign/task_query.h"
#include "test_util.h"

namespace hralign {
namespace {

using testing::bitwise_equal;

QueryEmbedder make_embedder(uint64_t seed, size_t width = 32) {
  RngState rng(seed);
  return QueryEmbedder(width, rng);
}

TEST(Fnv1a, KnownVectors) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(fnv1a64("foobar"), 0x85944171f73967e8ULL);
}

TEST(Tokenize, LowercasesAndSplitsOnWhitespace) {
  EXPECT_EQ(tokenize("  Stack\tCUPS\n carefully "), (std::vector<std::string>{"stack", "cups", "carefully"}));
  EXPECT_TRUE(tokenize("   ").empty());
}

TEST(EmbedTask, SameTokenMultisetSameQuery) {
  const QueryEmbedder q = make_embedder(1);
  const Tensor a = embed_task(q, {"push the block left", 0});
  const Tensor b = embed_task(q, {"left Block the PUSH", 0});
  EXPECT_TRUE(bitwise_equal(a, b));
}

TEST(EmbedTask, ZeroProjectionGivesZeroQuery) {
  const QueryEmbedder q = QueryEmbedder::from_weights(Tensor::zeros({32, QueryEmbedder::kTextWidth}),
                                                      Tensor::zeros({32}));
  for (const char* text : {"stack cups", "open drawer", "x"}) {
    const Tensor e = embed_task(q, {text, 0});
    for (double v : e.data()) EXPECT_EQ(v, 0.0);
  }
}

TEST(EmbedTask, ReferencePhrasesDiffer) {
  const QueryEmbedder q = make_embedder(2);
  const Tensor a = embed_task(q, {"stack cups", 0});
  const Tensor b = embed_task(q, {"open drawer", 1});
  EXPECT_FALSE(bitwise_equal(a, b));
  EXPECT_EQ(a.shape(), (Shape{32}));
}

TEST(EmbedTask, TableIsFixedAcrossInstances) {
  const QueryEmbedder a = make_embedder(3);
  const QueryEmbedder b = make_embedder(4);
  EXPECT_TRUE(bitwise_equal(a.table(), b.table()));
  EXPECT_TRUE(bitwise_equal(a.text_features({"turn knob", 0}), b.text_features({"turn knob", 0})));
  EXPECT_FALSE(bitwise_equal(a.projection(), b.projection()));
}

TEST(EmbedTask, GradientReachesProjectionNotTable) {
  const QueryEmbedder q = make_embedder(5);
  const Tensor before = q.table().clone();
  sum(embed_task(q, {"wipe table", 0})).backward();
  EXPECT_TRUE(q.projection().has_grad());
  EXPECT_TRUE(q.bias().has_grad());
  EXPECT_FALSE(q.table().has_grad());
  EXPECT_FALSE(q.table().requires_grad());
  EXPECT_TRUE(bitwise_equal(q.table(), before));
}

TEST(EmbedTask, ProjectionGradientMatchesFiniteDifferences) {
  const TaskDescription desc{"please rotate valve", 0};
  for (int seed = 0; seed < testing::kGradSeeds; ++seed) {
    RngState rng(400 + seed);
    const std::vector<Tensor> inputs{testing::uniform_tensor({5, QueryEmbedder::kTextWidth}, rng),
                                     testing::uniform_tensor({5}, rng)};
    auto f = [&](const std::vector<Tensor>& x) {
      const QueryEmbedder q = QueryEmbedder::from_weights(x[0], x[1]);
      return testing::weighted_sum(embed_task(q, desc), 41);
    };
    EXPECT_LT(testing::gradient_error(f, inputs), testing::kGradTolerance);
  }
}

TEST(EmbedTask, EmptyDescriptionRejected) {
  const QueryEmbedder q = make_embedder(7);
  EXPECT_THROW(embed_task(q, {"  ", 0}), ArgumentError);
}

TEST(QueryEmbedder, FromWeightsChecksShapes) {
  EXPECT_THROW(QueryEmbedder::from_weights(Tensor::zeros({4, 10}), Tensor::zeros({4})), DimensionError);
  EXPECT_THROW(QueryEmbedder::from_weights(Tensor::zeros({4, 64}), Tensor::zeros({5})), DimensionError);
}

}  // namespace
}  // namespace hralign
