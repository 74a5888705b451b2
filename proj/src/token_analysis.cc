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
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "slotbridge/unicode.h"

namespace slotbridge {

TextTokens CountTokens(std::string_view text, const Tokenizer& tokenizer) {
  if (text.empty()) throw std::invalid_argument("CountTokens: empty text");
  TextTokens t;
  t.token_count = static_cast<int>(tokenizer.Encode(text).size());
  t.chars = static_cast<int>(unicode::CharLength(text));
  t.tokens_per_char = static_cast<double>(t.token_count) / t.chars;
  return t;
}

Summary Summarize(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("Summarize: empty sample");
  std::sort(values.begin(), values.end());
  const size_t n = values.size();
  Summary s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / n;
  s.median = n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
  const double pos = 0.95 * static_cast<double>(n - 1);
  const size_t lo = static_cast<size_t>(std::floor(pos));
  const size_t hi = std::min(lo + 1, n - 1);
  s.p95 = values[lo] + (pos - lo) * (values[hi] - values[lo]);
  return s;
}

InflationReport MeasureInflation(const std::vector<SentencePair>& pairs,
                                 const Tokenizer& tokenizer) {
  InflationReport r;
  std::vector<double> src, tgt, ratio;
  for (const SentencePair& p : pairs) {
    if (p.source_text.empty() || p.target_text.empty()) {
      ++r.excluded_empty;
      continue;
    }
    PairInflation row;
    row.id = p.id;
    row.source = CountTokens(p.source_text, tokenizer);
    row.target = CountTokens(p.target_text, tokenizer);
    row.inflation_ratio =
        static_cast<double>(row.source.token_count) / row.target.token_count;
    src.push_back(row.source.tokens_per_char);
    tgt.push_back(row.target.tokens_per_char);
    ratio.push_back(row.inflation_ratio);
    r.pairs.push_back(std::move(row));
  }
  if (!r.pairs.empty()) {
    r.source_tokens_per_char = Summarize(std::move(src));
    r.target_tokens_per_char = Summarize(std::move(tgt));
    r.inflation_ratio = Summarize(std::move(ratio));
  }
  return r;
}

ContextBudget ComputeContextBudget(int token_count, int context_limit) {
  if (context_limit <= 0) throw std::invalid_argument("context_limit must be positive");
  return ContextBudget{std::max(0, context_limit - token_count), token_count > context_limit};
}

std::vector<CharacterTokens> AnnotateCharacters(std::string_view text,
                                                const Tokenizer& tokenizer) {
  const std::vector<ByteSpan> spans = tokenizer.TokenSpans(text);
  std::vector<CharacterTokens> out;
  size_t pos = 0;
  for (char32_t cp : unicode::DecodeUtf8(text)) {
    const std::string encoded = unicode::EncodeUtf8(cp);
    CharacterTokens c{pos, pos + encoded.size(), encoded, {}};
    for (size_t t = 0; t < spans.size(); ++t) {
      if (spans[t].begin < c.byte_end && c.byte_begin < spans[t].end) {
        c.token_indices.push_back(static_cast<int>(t));
      }
    }
    pos = c.byte_end;
    out.push_back(std::move(c));
  }
  return out;
}

std::string InflationCsv(const InflationReport& report) {
  std::string out =
      "id,source_tokens,source_chars,source_tpc,target_tokens,target_chars,target_tpc,"
      "inflation_ratio\n";
  for (const PairInflation& p : report.pairs) {
    out += fmt::format("{},{},{},{},{},{},{},{}\n", p.id, p.source.token_count,
                       p.source.chars, p.source.tokens_per_char, p.target.token_count,
                       p.target.chars, p.target.tokens_per_char, p.inflation_ratio);
  }
  return out;
}

std::string SplitCharactersTsv(const std::vector<CharacterTokens>& annotation) {
  std::string out = "byte_begin\tbyte_end\tcharacter\ttokens\n";
  for (const CharacterTokens& c : annotation) {
    if (c.token_indices.size() < 2) continue;
    out += fmt::format("{}\t{}\t{}\t{}\n", c.byte_begin, c.byte_end, c.character,
                       fmt::join(c.token_indices, ","));
  }
  return out;
}

}  // namespace slotbridge
