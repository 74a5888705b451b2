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

#include "slotbridge/token_analysis.h"

#include <algorithm>
#include <random>

#include <gtest/gtest.h>

#include "oracles/oracles.h"
#include "slotbridge/unicode.h"

namespace slotbridge {
namespace {

ByteBpeTokenizer BytesOnly() {
  const auto sym = oracle::ByteSymbols();
  std::unordered_map<std::string, int> vocab;
  for (int b = 0; b < 256; ++b) vocab[sym[b]] = b;
  return ByteBpeTokenizer(vocab, {});
}

// Linear interpolation between the order statistics around 0.95 (n - 1).
double ReferenceP95(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const double h = 0.95 * (v.size() - 1);
  const size_t k = static_cast<size_t>(h);
  if (k + 1 >= v.size()) return v.back();
  return v[k] * (1 - (h - k)) + v[k + 1] * (h - k);
}

TEST(SummarizeTest, MatchesReferenceStatistics) {
  EXPECT_THROW(Summarize({}), std::invalid_argument);
  const Summary one = Summarize({4.0});
  EXPECT_EQ(one.mean, 4.0);
  EXPECT_EQ(one.median, 4.0);
  EXPECT_EQ(one.p95, 4.0);
  // 1..20: p95 position 18.05 -> 19.05.
  std::vector<double> v(20);
  for (int i = 0; i < 20; ++i) v[i] = 20 - i;
  const Summary s = Summarize(v);
  EXPECT_DOUBLE_EQ(s.mean, 10.5);
  EXPECT_DOUBLE_EQ(s.median, 10.5);
  EXPECT_NEAR(s.p95, 19.05, 1e-12);
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(0.0, 5.0);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> x(1 + t);
    for (double& e : x) e = u(gen);
    EXPECT_NEAR(Summarize(x).p95, ReferenceP95(x), 1e-12);
  }
}

TEST(CountTokensTest, RecomputesFromEncodeAndNfdLength) {
  const ByteBpeTokenizer bpe = BytesOnly();
  // Khmer KA + coeng + KA: three code points of three bytes each.
  const std::string khmer = "\xe1\x9e\x80\xe1\x9f\x92\xe1\x9e\x80";
  const TextTokens t = CountTokens(khmer, bpe);
  EXPECT_EQ(t.token_count, 9);
  EXPECT_EQ(t.chars, 3);
  EXPECT_DOUBLE_EQ(t.tokens_per_char, 3.0);
  // Precomposed e-acute counts as two NFD characters.
  EXPECT_EQ(CountTokens("\xc3\xa9", bpe).chars, 2);
  EXPECT_THROW(CountTokens("", bpe), std::invalid_argument);
}

TEST(MeasureInflationTest, RatiosAndOrderIndependence) {
  const ByteBpeTokenizer bpe = BytesOnly();
  std::vector<SentencePair> pairs = {
      {"a", "\xe1\x9e\x80\xe1\x9e\x81", "ab", {}},
      {"b", "", "x", {}},
      {"c", "\xe1\x9e\x80", "abc", {}},
  };
  const InflationReport r = MeasureInflation(pairs, bpe);
  ASSERT_EQ(r.pairs.size(), 2u);
  EXPECT_EQ(r.excluded_empty, 1);
  EXPECT_EQ(r.pairs[0].id, "a");
  EXPECT_DOUBLE_EQ(r.pairs[0].inflation_ratio, 3.0);
  EXPECT_DOUBLE_EQ(r.pairs[1].inflation_ratio, 1.0);
  EXPECT_DOUBLE_EQ(r.inflation_ratio.mean, 2.0);
  EXPECT_DOUBLE_EQ(r.source_tokens_per_char.median, 3.0);
  std::reverse(pairs.begin(), pairs.end());
  const InflationReport back = MeasureInflation(pairs, bpe);
  EXPECT_EQ(back.inflation_ratio.p95, r.inflation_ratio.p95);
  EXPECT_EQ(back.target_tokens_per_char.mean, r.target_tokens_per_char.mean);
  EXPECT_EQ(InflationCsv(r).substr(0, 3), "id,");
}

TEST(ContextBudgetTest, ClampsAndFlagsOverflow) {
  EXPECT_EQ(ComputeContextBudget(10, 2048).remaining, 2038);
  EXPECT_FALSE(ComputeContextBudget(2048, 2048).overflow);
  const ContextBudget over = ComputeContextBudget(2049, 2048);
  EXPECT_TRUE(over.overflow);
  EXPECT_EQ(over.remaining, 0);
  EXPECT_THROW(ComputeContextBudget(1, 0), std::invalid_argument);
}

TEST(AnnotateCharactersTest, ByteTokensSplitMultiByteCharacters) {
  const ByteBpeTokenizer bpe = BytesOnly();
  const std::string text = "a\xe1\x9e\x80";
  const auto ann = AnnotateCharacters(text, bpe);
  ASSERT_EQ(ann.size(), 2u);
  EXPECT_EQ(ann[0].token_indices, std::vector<int>{0});
  EXPECT_EQ(ann[1].byte_begin, 1u);
  EXPECT_EQ(ann[1].byte_end, 4u);
  EXPECT_EQ(ann[1].token_indices, (std::vector<int>{1, 2, 3}));
  EXPECT_EQ(SplitCharactersTsv(ann),
            "byte_begin\tbyte_end\tcharacter\ttokens\n1\t4\t\xe1\x9e\x80\t1,2,3\n");
  // A character-level tokenizer never splits.
  const CharTokenizer chars(0);
  for (const auto& c : AnnotateCharacters(text, chars)) EXPECT_EQ(c.token_indices.size(), 1u);
}

}  // namespace
}  // namespace slotbridge
