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

// Parallel-corpus ingestion, length filters, instruction templates and the
// synthetic cipher corpus.

#ifndef SLOTBRIDGE_DATA_H_
#define SLOTBRIDGE_DATA_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace slotbridge {

// source_text is the foreign side, target_text the English side.
struct SentencePair {
  std::string id;
  std::string source_text;
  std::string target_text;
  // Provenance of applied normalizations, e.g. "normalized:nfd", "truncated".
  std::vector<std::string> flags;

  bool operator==(const SentencePair&) const = default;
};

enum class CorpusFormat { kTsv, kJsonl };

// "tsv" or "jsonl"; anything else throws std::invalid_argument.
CorpusFormat ParseCorpusFormat(std::string_view name);

struct LoadResult {
  std::vector<SentencePair> pairs;
  size_t malformed = 0;
};

// TSV: "source<TAB>target" per line, id "<stem>:<line>". JSONL: one object
// per line with "source_text"/"target_text" (or "source"/"target") and an
// optional "id" and "flags". Blank lines are ignored; lines that do not
// yield two non-empty sides are counted as malformed and skipped. Throws
// MissingArtifactError when the file cannot be opened and
// std::runtime_error("corpus likely mis-formatted") when more than half of
// the non-blank lines are malformed.
LoadResult LoadParallel(const std::filesystem::path& path, CorpusFormat format);

// Canonical JSONL, one record per pair with id, source_text, target_text
// and flags.
std::string ToJsonl(const std::vector<SentencePair>& pairs);
void WriteJsonl(const std::filesystem::path& path,
                const std::vector<SentencePair>& pairs);

enum class Stage { kA, kB };

inline constexpr int kMinSourceChars = 12;
inline constexpr int kMaxSourceChars = 256;

// Lengths are counted in NFD code points. Pairs with an empty side are
// dropped in both stages. Stage A rewrites the source to NFD (flag
// "normalized:nfd" when that changes it) and truncates it to max_len (flag
// "truncated"). Stage B keeps the text as is and drops sources whose length
// falls outside [min_len, max_len]. Order is preserved and the filter is
// idempotent.
std::vector<SentencePair> FilterPairs(const std::vector<SentencePair>& pairs,
                                      int min_len, int max_len, Stage stage);

enum class TemplateId {
  kBulletPointify,
  kTranslateToEnglish,
  kSummarizeInEnglish,
  kQaAboutText,
};

std::vector<TemplateId> AllTemplates();
std::string TemplateName(TemplateId t);
// Throws std::invalid_argument("unknown template: ...").
TemplateId ParseTemplate(std::string_view name);
std::string TemplateInstruction(TemplateId t);

// Sentences of text, each ending at '.', '!', '?' or the Khmer full stop,
// whitespace-trimmed. A trailing fragment without a terminator is kept.
std::vector<std::string> SplitSentences(std::string_view text);

// translate: target verbatim. bullet_pointify: one "- <sentence>" line per
// sentence. summarize: first sentence. qa: "Q: what is the first word? A:
// <first word>", the word stripped of trailing punctuation.
std::string MakeTarget(const SentencePair& pair, TemplateId t);

struct RenderedInstruction {
  std::string prompt;
  std::string target;
};

// prompt = "User:" + instruction + "<f0>...<fK-1>" + " Assistant:".
RenderedInstruction RenderInstruction(const SentencePair& pair, TemplateId t,
                                      int num_slots);

struct CipherCorpusConfig {
  std::vector<std::string> vocab;  // empty: the built-in word list
  // Word -> pseudo-word. Empty: derived from seed with MakeCipherMap.
  std::map<std::string, std::string> cipher_map;
  int n_pairs = 2756;
  uint64_t seed = 0;
  int min_words = 3;
  int max_words = 6;
  int max_sentences = 2;

  nlohmann::json ToJson() const;
  static CipherCorpusConfig FromJson(const nlohmann::json& j);
};

const std::vector<std::string>& DefaultCipherVocab();

// Injective map from each word to 3-5 Khmer consonants (U+1780-U+17A2).
std::map<std::string, std::string> MakeCipherMap(
    const std::vector<std::string>& vocab, uint64_t seed);

// n_pairs pairs with distinct targets. English sentences end in '.', their
// enciphered counterparts in U+17D4; words are separated by single spaces.
// Throws std::invalid_argument for an empty or non-injective vocabulary and
// std::runtime_error when n_pairs distinct targets cannot be produced.
std::vector<SentencePair> GenerateCipherCorpus(const CipherCorpusConfig& config);

// Inverts the cipher word by word. Throws std::invalid_argument on an
// unknown pseudo-word.
std::string Decipher(std::string_view source,
                     const std::map<std::string, std::string>& cipher_map);

}  // namespace slotbridge

#endif  // SLOTBRIDGE_DATA_H_
