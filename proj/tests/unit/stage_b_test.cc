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

#include "slotbridge/stage_b.h"

#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "oracles/oracles.h"

namespace slotbridge {
namespace {

TEST(SftLossTest, UniformLogitsGiveLogVocab) {
  Graph g;
  const std::vector<int> labels = {-1, 3, 7, 15};
  EXPECT_NEAR(SftLoss(g.Constant(Matrix::Zero(4, 16)), labels).scalar(), std::log(16.0),
              1e-12);
}

TEST(SftLossTest, ConfidentCorrectIsNearZero) {
  Matrix logits = Matrix::Zero(3, 16);
  const std::vector<int> labels = {2, 5, 9};
  for (int i = 0; i < 3; ++i) logits(i, labels[i]) = 50.0;
  Graph g;
  EXPECT_LT(SftLoss(g.Constant(logits), labels).scalar(), 1e-12);
}

TEST(SftLossTest, MatchesTokenLoopOracle) {
  std::mt19937_64 rng(31);
  for (int t = 0; t < 100; ++t) {
    const int n = 2 + t % 6, v = 3 + t % 11;
    const Matrix logits = oracle::RandomMatrix(rng, n, v, 3.0);
    std::vector<int> labels(n);
    for (int i = 0; i < n; ++i) labels[i] = (rng() % 3 == 0) ? -1 : static_cast<int>(rng() % v);
    labels[0] = 0;
    Graph g;
    EXPECT_NEAR(SftLoss(g.Constant(logits), labels).scalar(),
                oracle::TokenCrossEntropy(oracle::ToMat(logits), labels), 1e-6);
  }
}

TEST(SftLossTest, NoResponseTokensThrows) {
  Graph g;
  const std::vector<int> labels = {-1, -1};
  EXPECT_THROW(SftLoss(g.Constant(Matrix::Zero(2, 4)), labels), std::invalid_argument);
}

class StageBTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    ToyModelConfig c;
    c.encoder_dim = 8;
    c.decoder_dim = 8;
    c.layers = 1;
    c.heads = 2;
    c.seed = 41;
    models_ = new ToyModels(BuildToyModels(c));
    CipherCorpusConfig cc;
    cc.n_pairs = 6;
    cc.seed = 41;
    pairs_ = new std::vector<SentencePair>(GenerateCipherCorpus(cc));
    Rng rng(41);
    projector_ = new Projector({.input_dim = 8, .hidden_dim = 16, .output_dim = 8}, rng);
  }
  static void TearDownTestSuite() {
    delete models_;
    delete pairs_;
    delete projector_;
  }

  static StageBConfig SmallConfig() {
    StageBConfig c;
    c.batch_size = 4;
    c.steps = 6;
    c.learning_rate = 1e-3;
    c.adapter_bottleneck = 4;
    c.lora.rank = 2;
    c.lora.alpha = 2;
    c.seed = 5;
    return c;
  }

  static ToyModels* models_;
  static std::vector<SentencePair>* pairs_;
  static Projector* projector_;
};

ToyModels* StageBTest::models_ = nullptr;
std::vector<SentencePair>* StageBTest::pairs_ = nullptr;
Projector* StageBTest::projector_ = nullptr;

TEST_F(StageBTest, ExamplesHoldEverySlotTokenAndMaskThePrompt) {
  const FrozenModels v = ViewOf(*models_);
  for (TemplateId t : AllTemplates()) {
    const auto ex = MakeStageBExample(v, (*pairs_)[0], t, SmallConfig());
    ASSERT_TRUE(ex.has_value());
    std::vector<int> slots;
    for (int id : ex->input_ids) {
      if (std::count(v.slot_ids.begin(), v.slot_ids.end(), id)) slots.push_back(id);
    }
    EXPECT_EQ(slots, v.slot_ids);
    const auto last_slot =
        std::find(ex->input_ids.begin(), ex->input_ids.end(), v.slot_ids.back());
    const size_t slot_pos = last_slot - ex->input_ids.begin();
    for (size_t i = 0; i <= slot_pos; ++i) EXPECT_EQ(ex->labels[i], -1);
    EXPECT_EQ(ex->input_ids.back(), v.eos_id);
    EXPECT_EQ(ex->labels[ex->labels.size() - 2], v.eos_id);
    EXPECT_EQ(ex->labels.back(), -1);
  }
}

TEST_F(StageBTest, ExampleWithoutItsSlotTokensIsSkipped) {
  // A view whose first slot id never occurs in rendered prompts.
  FrozenModels v = ViewOf(*models_);
  v.slot_ids[0] = v.foreign_emb_id;
  EXPECT_FALSE(MakeStageBExample(v, (*pairs_)[0], TemplateId::kTranslateToEnglish,
                                 SmallConfig())
                   .has_value());
  // When nothing can be rendered the trainer refuses to start.
  EXPECT_THROW(StageBTrainer(v, *projector_, *pairs_, SmallConfig()), std::invalid_argument);
}

TEST_F(StageBTest, ContrastRunsOnEveryThirdStep) {
  StageBTrainer t(ViewOf(*models_), *projector_, *pairs_, SmallConfig());
  for (int i = 1; i <= 6; ++i) {
    const StageBReport r = t.Step();
    EXPECT_EQ(r.step, i);
    EXPECT_EQ(r.contrast_active, i % 3 == 0);
    if (!r.contrast_active) {
      EXPECT_EQ(r.contrast, 0.0);
    }
  }
}

TEST_F(StageBTest, ReportSumsToTotal) {
  StageBTrainer t(ViewOf(*models_), *projector_, *pairs_, SmallConfig());
  const LossWeights w;
  for (int i = 0; i < 6; ++i) {
    const StageBReport r = t.Step();
    const double want = r.sft + w.lambda_cos_aux * r.aux_cos + w.lambda_nce_aux * r.aux_nce +
                        (r.contrast_active ? r.contrast : 0.0);
    EXPECT_NEAR(r.total, want, 1e-6);
  }
}

TEST_F(StageBTest, DegenerateInjectionEqualsZeroedExactly) {
  StageBModules modules(SmallConfig(), *models_->decoder);
  modules.expander().set_scale(0.0);
  modules.lora().ZeroB();
  const FrozenModels v = ViewOf(*models_);
  for (const SentencePair& p : *pairs_) {
    for (TemplateId t : AllTemplates()) {
      const auto ex = MakeStageBExample(v, p, t, SmallConfig());
      ASSERT_TRUE(ex.has_value());
      const ExampleLosses l = EvaluateExample(v, *projector_, modules, *ex);
      EXPECT_EQ(l.injected, l.zeroed);
    }
  }
}

TEST_F(StageBTest, OnlyBridgeModulesChange) {
  const std::string enc = models_->encoder->WeightsDigest();
  const std::string dec = models_->decoder->WeightsDigest();
  const std::string proj = projector_->Digest();
  StageBTrainer t(ViewOf(*models_), *projector_, *pairs_, SmallConfig());
  const std::string before = t.modules().Digest();
  t.Run();
  EXPECT_EQ(models_->encoder->WeightsDigest(), enc);
  EXPECT_EQ(models_->decoder->WeightsDigest(), dec);
  EXPECT_EQ(projector_->Digest(), proj);
  EXPECT_NE(t.modules().Digest(), before);
  // Trainable set = expander + scale, adapter and LoRA.
  const StageBModules& m = t.modules();
  EXPECT_EQ(m.Parameters().size(),
            m.expander().Parameters().size() + 4 + m.lora().Parameters().size());
}

TEST_F(StageBTest, SameSeedSameRunAndCheckpointRebuildsModules) {
  StageBTrainer a(ViewOf(*models_), *projector_, *pairs_, SmallConfig());
  StageBTrainer b(ViewOf(*models_), *projector_, *pairs_, SmallConfig());
  a.Run();
  b.Run();
  EXPECT_EQ(a.modules().Digest(), b.modules().Digest());
  EXPECT_EQ(StageBCurveCsv(a.curve()), StageBCurveCsv(b.curve()));
  const TensorBundle ckpt = a.Checkpoint();
  const StageBConfig cfg = StageBConfigOf(ckpt);
  EXPECT_EQ(cfg.ToJson(), SmallConfig().ToJson());
  const StageBModules back = StageBModules::FromBundle(ckpt, cfg, *models_->decoder);
  EXPECT_EQ(back.Digest(), a.modules().Digest());
}

TEST_F(StageBTest, ConfigValidation) {
  StageBConfig c = SmallConfig();
  c.contrast_every = 0;
  EXPECT_THROW(c.Validate(), std::invalid_argument);
  c = SmallConfig();
  c.num_slots = 0;
  EXPECT_THROW(c.Validate(), std::invalid_argument);
  std::vector<SentencePair> none;
  EXPECT_THROW(StageBTrainer(ViewOf(*models_), *projector_, none, SmallConfig()),
               std::invalid_argument);
}

}  // namespace
}  // namespace slotbridge
