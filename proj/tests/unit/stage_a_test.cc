// Copyright 2026 The Slotbridge Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "slotbridge/stage_a.h"

#include <algorithm>
#include <set>

#include <gtest/gtest.h>

#include "slotbridge/errors.h"

namespace slotbridge {
namespace {

class StageATest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    ToyModelConfig c;
    c.encoder_dim = 8;
    c.decoder_dim = 8;
    c.layers = 1;
    c.heads = 2;
    c.seed = 21;
    models_ = new ToyModels(BuildToyModels(c));
    CipherCorpusConfig cc;
    cc.n_pairs = 40;
    cc.seed = 21;
    pairs_ = new std::vector<SentencePair>(GenerateCipherCorpus(cc));
  }
  static void TearDownTestSuite() {
    delete models_;
    delete pairs_;
  }

  static StageAConfig SmallConfig() {
    StageAConfig c;
    c.batch_size = 8;
    c.steps = 6;
    c.learning_rate = 1e-3;
    c.projector_hidden = 16;
    c.hard_k = 8;
    c.queue_capacity = 20;
    c.seed = 3;
    return c;
  }

  static ToyModels* models_;
  static std::vector<SentencePair>* pairs_;
};

ToyModels* StageATest::models_ = nullptr;
std::vector<SentencePair>* StageATest::pairs_ = nullptr;

TEST_F(StageATest, ReportSumsToTotal) {
  StageATrainer t(ViewOf(*models_), *pairs_, SmallConfig());
  const LossWeights w;
  for (int i = 0; i < 6; ++i) {
    const StageAReport r = t.Step();
    EXPECT_EQ(r.step, i + 1);
    EXPECT_NEAR(r.total, r.nce + w.lambda_dir * r.dir + w.lambda_norm * r.norm, 1e-6);
    EXPECT_EQ(r.queue_size, std::min<size_t>(20, 8 * (i + 1)));
    // The first step sees an empty queue.
    if (i == 0) EXPECT_EQ(r.hard_negatives, 0);
    else EXPECT_GT(r.hard_negatives, 0);
  }
}

TEST_F(StageATest, BatchesPermuteEachEpochAndDropTheRemainder) {
  StageATrainer t(ViewOf(*models_), *pairs_, SmallConfig());
  std::multiset<int> seen;
  for (int s = 0; s < 5; ++s) {
    const auto idx = t.BatchIndices(s);
    EXPECT_EQ(idx.size(), 8u);
    seen.insert(idx.begin(), idx.end());
  }
  // 40 pairs / batch 8: one epoch covers every pair exactly once.
  EXPECT_EQ(seen.size(), 40u);
  EXPECT_EQ(std::set<int>(seen.begin(), seen.end()).size(), 40u);
  EXPECT_NE(t.BatchIndices(0), t.BatchIndices(5));
}

TEST_F(StageATest, SameSeedSameRun) {
  StageATrainer a(ViewOf(*models_), *pairs_, SmallConfig());
  StageATrainer b(ViewOf(*models_), *pairs_, SmallConfig());
  a.Run();
  b.Run();
  EXPECT_EQ(a.projector().Digest(), b.projector().Digest());
  EXPECT_EQ(StageACurveCsv(a.curve()), StageACurveCsv(b.curve()));
}

TEST_F(StageATest, CheckpointResumesBitExactly) {
  StageAConfig c = SmallConfig();
  StageATrainer straight(ViewOf(*models_), *pairs_, c);
  straight.Run();

  StageATrainer first(ViewOf(*models_), *pairs_, c);
  for (int i = 0; i < 3; ++i) first.Step();
  const TensorBundle ckpt = first.Checkpoint();
  StageATrainer resumed(ViewOf(*models_), *pairs_, c);
  resumed.Restore(ckpt);
  EXPECT_EQ(resumed.step(), 3);
  resumed.Run();
  EXPECT_EQ(resumed.projector().Digest(), straight.projector().Digest());
  EXPECT_EQ(resumed.queue().Contents(), straight.queue().Contents());
}

TEST_F(StageATest, FrozenWeightsUnchangedAndProjectorTrained) {
  const std::string enc = models_->encoder->WeightsDigest();
  const std::string dec = models_->decoder->WeightsDigest();
  StageATrainer t(ViewOf(*models_), *pairs_, SmallConfig());
  const std::string before = t.projector().Digest();
  t.Run();
  EXPECT_EQ(models_->encoder->WeightsDigest(), enc);
  EXPECT_EQ(models_->decoder->WeightsDigest(), dec);
  EXPECT_NE(t.projector().Digest(), before);
  const TensorBundle ckpt = t.Checkpoint();
  EXPECT_EQ(ckpt.meta.at("encoder_digest"), enc);
  EXPECT_EQ(ckpt.meta.at("decoder_digest"), dec);
}

TEST_F(StageATest, RejectsTooSmallDatasetsAndBadConfigs) {
  std::vector<SentencePair> few(pairs_->begin(), pairs_->begin() + 4);
  EXPECT_THROW(StageATrainer(ViewOf(*models_), few, SmallConfig()), std::invalid_argument);
  StageAConfig c = SmallConfig();
  c.instruction_pool.clear();
  EXPECT_THROW(c.Validate(), std::invalid_argument);
  c = SmallConfig();
  c.batch_size = 0;
  EXPECT_THROW(c.Validate(), std::invalid_argument);
}

TEST_F(StageATest, ConfigJsonRoundTrip) {
  StageAConfig c = SmallConfig();
  c.false_negative_guard.reset();
  const StageAConfig back = StageAConfig::FromJson(c.ToJson());
  EXPECT_EQ(back.ToJson(), c.ToJson());
  EXPECT_FALSE(back.false_negative_guard.has_value());
}

TEST_F(StageATest, TeacherPromptPlacesReservedTokenAfterText) {
  const SentencePair& p = (*pairs_)[0];
  const std::string prompt = TeacherPromptFor(p, "Read this sentence: ");
  EXPECT_EQ(prompt, "User:Read this sentence: " + p.target_text + "<foreign_emb> Assistant:");
}

}  // namespace
}  // namespace slotbridge
