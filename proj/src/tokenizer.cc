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

#include "slotbridge/tokenizer.h"

#include <algorithm>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "slotbridge/errors.h"
#include "slotbridge/unicode.h"

namespace slotbridge {

std::string SlotToken(int k) { return fmt::format("<f{}>", k); }

CharTokenizer::CharTokenizer(int num_slots) : num_slots_(num_slots) {
  if (num_slots < 0) throw std::invalid_argument("num_slots < 0");
  specials_ = {"<pad>", "<unk>", "<bos>", "<eos>", std::string(kForeignEmbToken)};
  for (int k = 0; k < num_slots; ++k) specials_.push_back(SlotToken(k));
  id_to_text_ = specials_;
  auto add = [this](char32_t c) {
    char_to_id_[c] = static_cast<int>(id_to_text_.size());
    id_to_text_.push_back(unicode::EncodeUtf8(c));
  };
  add(U'\t');
  add(U'\n');
  for (char32_t c = 0x20; c <= 0x7e; ++c) add(c);
  for (char32_t c = 0x1780; c <= 0x17ff; ++c) add(c);
}

int CharTokenizer::SlotId(int k) const {
  if (k < 0 || k >= num_slots_) throw std::out_of_range("slot index");
  return kForeignEmb + 1 + k;
}

std::vector<int> CharTokenizer::SlotIds() const {
  std::vector<int> ids;
  for (int k = 0; k < num_slots_; ++k) ids.push_back(SlotId(k));
  return ids;
}

std::vector<int> CharTokenizer::ReservedIds() const {
  std::vector<int> ids = {kForeignEmb};
  for (int id : SlotIds()) ids.push_back(id);
  return ids;
}

std::pair<int, size_t> CharTokenizer::Next(std::string_view text,
                                           size_t pos) const {
  if (text[pos] == '<') {
    // Longest special literal wins (<f1> vs <f10>).
    int best = -1;
    size_t best_len = 0;
    for (size_t i = 0; i < specials_.size(); ++i) {
      const std::string& s = specials_[i];
      if (s.size() > best_len && text.substr(pos, s.size()) == s) {
        best = static_cast<int>(i);
        best_len = s.size();
      }
    }
    if (best >= 0) return {best, best_len};
  }
  size_t len = 1;
  const unsigned char b0 = static_cast<unsigned char>(text[pos]);
  if (b0 >= 0xf0) {
    len = 4;
  } else if (b0 >= 0xe0) {
    len = 3;
  } else if (b0 >= 0xc0) {
    len = 2;
  }
  len = std::min(len, text.size() - pos);
  const std::string_view chunk = text.substr(pos, len);
  if (!unicode::IsValidUtf8(chunk)) return {kUnk, 1};
  const char32_t c = unicode::DecodeUtf8(chunk).front();
  auto it = char_to_id_.find(c);
  return {it == char_to_id_.end() ? kUnk : it->second, len};
}

std::vector<int> CharTokenizer::Encode(std::string_view text) const {
  std::vector<int> ids;
  size_t pos = 0;
  while (pos < text.size()) {
    auto [id, len] = Next(text, pos);
    ids.push_back(id);
    pos += len;
  }
  return ids;
}

std::vector<ByteSpan> CharTokenizer::TokenSpans(std::string_view text) const {
  std::vector<ByteSpan> spans;
  size_t pos = 0;
  while (pos < text.size()) {
    const size_t len = Next(text, pos).second;
    spans.push_back({pos, pos + len});
    pos += len;
  }
  return spans;
}

std::string CharTokenizer::Decode(std::span<const int> ids) const {
  std::string out;
  for (int id : ids) {
    if (id < 0 || id >= vocab_size()) throw std::out_of_range("token id");
    out += id_to_text_[id];
  }
  return out;
}

namespace {

// GPT-2 reversible byte -> printable code point table.
const std::vector<std::string>& ByteToSymbol() {
  static const std::vector<std::string> table = [] {
    std::vector<std::string> t(256);
    int n = 0;
    for (int b = 0; b < 256; ++b) {
      const bool printable =
          (b >= 33 && b <= 126) || (b >= 161 && b <= 172) || (b >= 174);
      const char32_t cp = printable ? static_cast<char32_t>(b)
                                    : static_cast<char32_t>(256 + n++);
      t[b] = unicode::EncodeUtf8(cp);
    }
    return t;
  }();
  return table;
}

const std::unordered_map<std::string, unsigned char>& SymbolToByte() {
  static const std::unordered_map<std::string, unsigned char> table = [] {
    std::unordered_map<std::string, unsigned char> t;
    const auto& fwd = ByteToSymbol();
    for (int b = 0; b < 256; ++b) t[fwd[b]] = static_cast<unsigned char>(b);
    return t;
  }();
  return table;
}

bool IsNewline(char32_t c) { return c == U'\r' || c == U'\n'; }

char32_t AsciiLower(char32_t c) {
  return (c >= U'A' && c <= U'Z') ? c + 32 : c;
}

}  // namespace

std::vector<ByteSpan> PreTokenize(std::string_view text) {
  // Decode with byte offsets.
  std::vector<char32_t> cps;
  std::vector<size_t> offs;
  {
    size_t pos = 0;
    while (pos < text.size()) {
      const unsigned char b0 = static_cast<unsigned char>(text[pos]);
      size_t len = b0 >= 0xf0 ? 4 : b0 >= 0xe0 ? 3 : b0 >= 0xc0 ? 2 : 1;
      len = std::min(len, text.size() - pos);
      const auto chunk = text.substr(pos, len);
      if (!unicode::IsValidUtf8(chunk)) {
        throw std::invalid_argument("PreTokenize: malformed UTF-8");
      }
      cps.push_back(unicode::DecodeUtf8(chunk).front());
      offs.push_back(pos);
      pos += len;
    }
    offs.push_back(text.size());
  }
  const size_t n = cps.size();
  auto L = [&](size_t i) { return i < n && unicode::IsLetter(cps[i]); };
  auto N = [&](size_t i) { return i < n && unicode::IsNumber(cps[i]); };
  auto S = [&](size_t i) { return i < n && unicode::IsWhiteSpace(cps[i]); };

  std::vector<ByteSpan> pieces;
  size_t i = 0;
  while (i < n) {
    size_t end = i;
    // (?i:'s|'t|'re|'ve|'m|'ll|'d)
    if (cps[i] == U'\'' && i + 1 < n) {
      static const std::u32string kSuffixes[] = {U"s", U"t", U"re", U"ve",
                                                 U"m", U"ll", U"d"};
      for (const auto& suf : kSuffixes) {
        if (i + 1 + suf.size() > n) continue;
        bool ok = true;
        for (size_t k = 0; k < suf.size(); ++k) {
          ok = ok && AsciiLower(cps[i + 1 + k]) == suf[k];
        }
        if (ok) {
          end = i + 1 + suf.size();
          break;
        }
      }
    }
    // [^\r\n\p{L}\p{N}]?\p{L}+
    if (end == i) {
      size_t j = i;
      if (!L(j) && !N(j) && !IsNewline(cps[j]) && L(j + 1)) ++j;
      if (L(j)) {
        while (L(j)) ++j;
        end = j;
      }
    }
    // \p{N}{1,3}
    if (end == i && N(i)) {
      size_t j = i;
      while (j < n && j - i < 3 && N(j)) ++j;
      end = j;
    }
    //  ?[^\s\p{L}\p{N}]+[\r\n]*
    if (end == i) {
      size_t j = i;
      if (cps[j] == U' ') ++j;
      const size_t start = j;
      while (j < n && !S(j) && !L(j) && !N(j)) ++j;
      if (j > start) {
        while (j < n && IsNewline(cps[j])) ++j;
        end = j;
      }
    }
    if (end == i && S(i)) {
      size_t k = i;
      while (S(k)) ++k;
      // \s*[\r\n]+ : ends after the last newline inside the whitespace run.
      size_t last_nl = n;
      for (size_t j = i; j < k; ++j) {
        if (IsNewline(cps[j])) last_nl = j;
      }
      if (last_nl != n) {
        end = last_nl + 1;
      } else if (k == n) {
        end = k;  // \s+(?!\S) at end of text
      } else if (k - 1 > i) {
        end = k - 1;  // \s+(?!\S) leaves one space for the next piece
      } else {
        end = k;  // \s+
      }
    }
    if (end == i) end = i + 1;  // unreachable for valid input; keeps progress
    pieces.push_back({offs[i], offs[end]});
    i = end;
  }
  return pieces;
}

ByteBpeTokenizer::ByteBpeTokenizer(
    std::unordered_map<std::string, int> vocab,
    std::vector<std::pair<std::string, std::string>> merges, bool ignore_merges)
    : vocab_(std::move(vocab)), ignore_merges_(ignore_merges) {
  int max_id = -1;
  for (const auto& [sym, id] : vocab_) max_id = std::max(max_id, id);
  vocab_size_ = max_id + 1;
  id_to_symbol_.assign(vocab_size_, "");
  for (const auto& [sym, id] : vocab_) {
    if (id < 0) throw std::invalid_argument("negative token id in vocab");
    id_to_symbol_[id] = sym;
  }
  for (size_t r = 0; r < merges.size(); ++r) {
    merge_rank_.emplace(std::move(merges[r]), static_cast<int>(r));
  }
}

ByteBpeTokenizer ByteBpeTokenizer::FromFiles(
    const std::filesystem::path& vocab_json,
    const std::filesystem::path& merges_txt) {
  std::ifstream vin(vocab_json);
  if (!vin) throw MissingArtifactError("cannot open " + vocab_json.string());
  const nlohmann::json vj = nlohmann::json::parse(vin);
  std::unordered_map<std::string, int> vocab;
  for (const auto& [k, v] : vj.items()) vocab[k] = v.get<int>();

  std::ifstream min(merges_txt);
  if (!min) throw MissingArtifactError("cannot open " + merges_txt.string());
  std::vector<std::pair<std::string, std::string>> merges;
  std::string line;
  while (std::getline(min, line)) {
    if (line.empty() || line.starts_with("#version")) continue;
    const size_t sp = line.find(' ');
    if (sp == std::string::npos) {
      throw std::invalid_argument("bad merges line: " + line);
    }
    merges.emplace_back(line.substr(0, sp), line.substr(sp + 1));
  }
  return ByteBpeTokenizer(std::move(vocab), std::move(merges));
}

ByteBpeTokenizer ByteBpeTokenizer::FromTokenizerJson(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingArtifactError("cannot open " + path.string());
  const nlohmann::json j = nlohmann::json::parse(in);
  const nlohmann::json& model = j.at("model");
  std::unordered_map<std::string, int> vocab;
  for (const auto& [k, v] : model.at("vocab").items()) vocab[k] = v.get<int>();
  std::vector<std::pair<std::string, std::string>> merges;
  for (const auto& m : model.at("merges")) {
    if (m.is_string()) {
      const std::string s = m.get<std::string>();
      const size_t sp = s.find(' ');
      merges.emplace_back(s.substr(0, sp), s.substr(sp + 1));
    } else {
      merges.emplace_back(m.at(0).get<std::string>(), m.at(1).get<std::string>());
    }
  }
  const bool ignore_merges = model.value("ignore_merges", false);
  return ByteBpeTokenizer(std::move(vocab), std::move(merges), ignore_merges);
}

ByteBpeTokenizer::Piece ByteBpeTokenizer::MergePiece(std::string_view bytes,
                                                     size_t offset) const {
  const auto& b2s = ByteToSymbol();
  Piece p;
  for (size_t i = 0; i < bytes.size(); ++i) {
    p.symbols.push_back(b2s[static_cast<unsigned char>(bytes[i])]);
    p.spans.push_back({offset + i, offset + i + 1});
  }
  if (ignore_merges_ && p.symbols.size() > 1) {
    std::string joined;
    for (const auto& s : p.symbols) joined += s;
    if (vocab_.contains(joined)) {
      return Piece{{joined}, {{offset, offset + bytes.size()}}};
    }
  }
  while (p.symbols.size() > 1) {
    int best_rank = std::numeric_limits<int>::max();
    size_t best = 0;
    for (size_t i = 0; i + 1 < p.symbols.size(); ++i) {
      auto it = merge_rank_.find({p.symbols[i], p.symbols[i + 1]});
      if (it != merge_rank_.end() && it->second < best_rank) {
        best_rank = it->second;
        best = i;
      }
    }
    if (best_rank == std::numeric_limits<int>::max()) break;
    p.symbols[best] += p.symbols[best + 1];
    p.spans[best].end = p.spans[best + 1].end;
    p.symbols.erase(p.symbols.begin() + static_cast<long>(best) + 1);
    p.spans.erase(p.spans.begin() + static_cast<long>(best) + 1);
  }
  return p;
}

void ByteBpeTokenizer::EncodeImpl(std::string_view text, std::vector<int>* ids,
                                  std::vector<ByteSpan>* spans) const {
  for (const ByteSpan& piece : PreTokenize(text)) {
    Piece p = MergePiece(text.substr(piece.begin, piece.end - piece.begin),
                         piece.begin);
    for (size_t i = 0; i < p.symbols.size(); ++i) {
      auto it = vocab_.find(p.symbols[i]);
      if (it == vocab_.end()) {
        throw std::invalid_argument("symbol not in BPE vocabulary: " +
                                    p.symbols[i]);
      }
      if (ids != nullptr) ids->push_back(it->second);
      if (spans != nullptr) spans->push_back(p.spans[i]);
    }
  }
}

std::vector<int> ByteBpeTokenizer::Encode(std::string_view text) const {
  std::vector<int> ids;
  EncodeImpl(text, &ids, nullptr);
  return ids;
}

std::vector<ByteSpan> ByteBpeTokenizer::TokenSpans(std::string_view text) const {
  std::vector<ByteSpan> spans;
  EncodeImpl(text, nullptr, &spans);
  return spans;
}

std::string ByteBpeTokenizer::Decode(std::span<const int> ids) const {
  const auto& s2b = SymbolToByte();
  std::string out;
  for (int id : ids) {
    if (id < 0 || id >= vocab_size_) throw std::out_of_range("token id");
    const std::string& sym = id_to_symbol_[id];
    // Walk the symbol one code point at a time.
    for (char32_t c : unicode::DecodeUtf8(sym)) {
      auto it = s2b.find(unicode::EncodeUtf8(c));
      if (it == s2b.end()) throw std::invalid_argument("non-byte symbol");
      out.push_back(static_cast<char>(it->second));
    }
  }
  return out;
}

}  // namespace slotbridge
