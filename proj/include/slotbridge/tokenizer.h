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

#ifndef SLOTBRIDGE_TOKENIZER_H_
#define SLOTBRIDGE_TOKENIZER_H_

#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace slotbridge {

// Half-open byte range [begin, end) of the source text covered by a token.
struct ByteSpan {
  size_t begin = 0;
  size_t end = 0;
  bool operator==(const ByteSpan&) const = default;
};

class Tokenizer {
 public:
  virtual ~Tokenizer() = default;

  virtual std::vector<int> Encode(std::string_view text) const = 0;
  virtual std::string Decode(std::span<const int> ids) const = 0;
  virtual int vocab_size() const = 0;
  // One span per token of Encode(text), in order.
  virtual std::vector<ByteSpan> TokenSpans(std::string_view text) const = 0;
};

inline constexpr std::string_view kForeignEmbToken = "<foreign_emb>";
std::string SlotToken(int k);  // "<fk>"

// Character-level tokenizer with a fixed, deterministic vocabulary:
//   ids [0, 5): <pad> <unk> <bos> <eos> <foreign_emb>
//   ids [5, 5+K): <f0> ... <fK-1>
//   then tab, newline, printable ASCII (0x20-0x7e) and the Khmer block
//   (U+1780-U+17FF), in code point order.
// Special-token literals in the input text are recognized as single tokens.
// decode(encode(t)) == t for any text drawn from this alphabet that does not
// itself spell a special-token literal by accident.
class CharTokenizer : public Tokenizer {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kBos = 2;
  static constexpr int kEos = 3;
  static constexpr int kForeignEmb = 4;

  explicit CharTokenizer(int num_slots);

  std::vector<int> Encode(std::string_view text) const override;
  std::string Decode(std::span<const int> ids) const override;
  int vocab_size() const override {
    return static_cast<int>(id_to_text_.size());
  }
  std::vector<ByteSpan> TokenSpans(std::string_view text) const override;

  int num_slots() const { return num_slots_; }
  int SlotId(int k) const;
  std::vector<int> SlotIds() const;
  // <foreign_emb> followed by <f0>...<fK-1>.
  std::vector<int> ReservedIds() const;
  bool Contains(char32_t c) const { return char_to_id_.contains(c); }

 private:
  // Returns (id, bytes consumed) for the token starting at pos.
  std::pair<int, size_t> Next(std::string_view text, size_t pos) const;

  int num_slots_;
  std::vector<std::string> id_to_text_;
  std::vector<std::string> specials_;
  std::unordered_map<char32_t, int> char_to_id_;
};

// Byte-level BPE in the GPT-2 / LLaMA-3 family: text is split by a
// pre-tokenizer that follows the LLaMA-3 pattern
//   (?i:'s|'t|'re|'ve|'m|'ll|'d)|[^\r\n\p{L}\p{N}]?\p{L}+|\p{N}{1,3}|
//    ?[^\s\p{L}\p{N}]+[\r\n]*|\s*[\r\n]+|\s+(?!\S)|\s+
// each piece is mapped to the printable byte alphabet and merged by rank.
// Whitespace is preserved exactly, so decode(encode(t)) == t whenever every
// produced symbol is in the vocabulary.
class ByteBpeTokenizer : public Tokenizer {
 public:
  // vocab.json (symbol -> id) plus merges.txt ("a b" per line, optional
  // "#version" header).
  static ByteBpeTokenizer FromFiles(const std::filesystem::path& vocab_json,
                                    const std::filesystem::path& merges_txt);
  // Hugging Face tokenizer.json with a BPE model section.
  static ByteBpeTokenizer FromTokenizerJson(const std::filesystem::path& path);
  // ignore_merges: a pre-tokenized piece that is itself a vocabulary entry
  // is emitted whole (LLaMA-3 behavior).
  ByteBpeTokenizer(std::unordered_map<std::string, int> vocab,
                   std::vector<std::pair<std::string, std::string>> merges,
                   bool ignore_merges = false);

  std::vector<int> Encode(std::string_view text) const override;
  std::string Decode(std::span<const int> ids) const override;
  int vocab_size() const override { return vocab_size_; }
  std::vector<ByteSpan> TokenSpans(std::string_view text) const override;

 private:
  struct Piece {
    std::vector<std::string> symbols;  // byte-alphabet strings
    std::vector<ByteSpan> spans;
  };
  void EncodeImpl(std::string_view text, std::vector<int>* ids,
                  std::vector<ByteSpan>* spans) const;
  Piece MergePiece(std::string_view bytes, size_t offset) const;

  std::unordered_map<std::string, int> vocab_;
  std::vector<std::string> id_to_symbol_;
  std::map<std::pair<std::string, std::string>, int> merge_rank_;
  int vocab_size_ = 0;
  bool ignore_merges_ = false;
};

// Byte offsets of pre-tokenized pieces per the LLaMA-3 split pattern.
std::vector<ByteSpan> PreTokenize(std::string_view text);

}  // namespace slotbridge

#endif  // SLOTBRIDGE_TOKENIZER_H_
