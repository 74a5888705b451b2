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

// Tokenization inflation: tokens per character, cross-script ratios and
// context budgets.

#ifndef SLOTBRIDGE_TOKEN_ANALYSIS_H_
#define SLOTBRIDGE_TOKEN_ANALYSIS_H_

#include <string>
#include <string_view>
#include <vector>

#include "slotbridge/data.h"
#include "slotbridge/tokenizer.h"

namespace slotbridge {

struct TextTokens {
  int token_count = 0;
  int chars = 0;  // NFD code points
  double tokens_per_char = 0.0;
};

// Throws std::invalid_argument for empty text.
TextTokens CountTokens(std::string_view text, const Tokenizer& tokenizer);

struct PairInflation {
  std::string id;
  TextTokens source;
  TextTokens target;
  double inflation_ratio = 0.0;  // source tokens / target tokens
};

// Aggregates of a sample. p95 interpolates linearly between order
// statistics at position 0.95 * (n - 1).
struct Summary {
  double mean = 0.0;
  double median = 0.0;
  double p95 = 0.0;
};

// Throws std::invalid_argument for an empty sample.
Summary Summarize(std::vector<double> values);

struct InflationReport {
  std::vector<PairInflation> pairs;
  int excluded_empty = 0;  // pairs with an empty side
  Summary source_tokens_per_char;
  Summary target_tokens_per_char;
  Summary inflation_ratio;
};

// Pairs keep their input order; the summaries do not depend on it.
InflationReport MeasureInflation(const std::vector<SentencePair>& pairs,
                                 const Tokenizer& tokenizer);

struct ContextBudget {
  int remaining = 0;  // max(0, limit - tokens)
  bool overflow = false;  // tokens > limit
};

// Throws std::invalid_argument unless context_limit > 0.
ContextBudget ComputeContextBudget(int token_count, int context_limit);

// One code point of the input and the tokens covering any of its bytes.
// More than one token marks a character split across tokens.
struct CharacterTokens {
  size_t byte_begin = 0;
  size_t byte_end = 0;
  std::string character;
  std::vector<int> token_indices;
};

std::vector<CharacterTokens> AnnotateCharacters(std::string_view text,
                                                const Tokenizer& tokenizer);

// "id,source_tokens,source_chars,source_tpc,target_tokens,target_chars,
// target_tpc,inflation_ratio" rows.
std::string InflationCsv(const InflationReport& report);
// Only characters covered by more than one token:
// "byte_begin<TAB>byte_end<TAB>character<TAB>token indices".
std::string SplitCharactersTsv(const std::vector<CharacterTokens>& annotation);

}  // namespace slotbridge

#endif  // SLOTBRIDGE_TOKEN_ANALYSIS_H_
