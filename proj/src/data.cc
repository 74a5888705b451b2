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

#include "slotbridge/data.h"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "slotbridge/checkpoint.h"
#include "slotbridge/errors.h"
#include "slotbridge/rng.h"
#include "slotbridge/tokenizer.h"
#include "slotbridge/unicode.h"

namespace slotbridge {
namespace {

constexpr std::string_view kKhmerFullStop = "។";
constexpr char32_t kFirstConsonant = 0x1780;
constexpr char32_t kLastConsonant = 0x17A2;

std::string_view Trim(std::string_view s) {
  const auto ws = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; };
  while (!s.empty() && ws(s.front())) s.remove_prefix(1);
  while (!s.empty() && ws(s.back())) s.remove_suffix(1);
  return s;
}

bool ParseTsvLine(std::string_view line, std::string* source, std::string* target) {
  const size_t tab = line.find('\t');
  if (tab == std::string_view::npos) return false;
  if (line.find('\t', tab + 1) != std::string_view::npos) return false;
  *source = std::string(line.substr(0, tab));
  *target = std::string(line.substr(tab + 1));
  return !source->empty() && !target->empty();
}

bool ParseJsonLine(std::string_view line, SentencePair* pair) {
  const auto j = nlohmann::json::parse(line, nullptr, /*allow_exceptions=*/false);
  if (!j.is_object()) return false;
  const auto text = [&](const char* a, const char* b, std::string* out) {
    for (const char* key : {a, b}) {
      auto it = j.find(key);
      if (it != j.end() && it->is_string()) {
        *out = it->get<std::string>();
        return !out->empty();
      }
    }
    return false;
  };
  if (!text("source_text", "source", &pair->source_text)) return false;
  if (!text("target_text", "target", &pair->target_text)) return false;
  if (auto it = j.find("id"); it != j.end()) {
    if (!it->is_string()) return false;
    pair->id = it->get<std::string>();
  }
  if (auto it = j.find("flags"); it != j.end()) {
    if (!it->is_array()) return false;
    for (const auto& f : *it) {
      if (!f.is_string()) return false;
      pair->flags.push_back(f.get<std::string>());
    }
  }
  return true;
}

std::string TruncateCodePoints(std::string_view text, size_t n) {
  std::vector<char32_t> cps = unicode::DecodeUtf8(text);
  if (cps.size() <= n) return std::string(text);
  return unicode::EncodeUtf8(std::u32string_view(cps.data(), n));
}

void AddFlag(std::vector<std::string>& flags, const std::string& flag) {
  if (std::find(flags.begin(), flags.end(), flag) == flags.end()) flags.push_back(flag);
}

}  // namespace

CorpusFormat ParseCorpusFormat(std::string_view name) {
  if (name == "tsv") return CorpusFormat::kTsv;
  if (name == "jsonl") return CorpusFormat::kJsonl;
  throw std::invalid_argument(fmt::format("unknown corpus format: {}", name));
}

LoadResult LoadParallel(const std::filesystem::path& path, CorpusFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifactError("cannot read corpus: " + path.string());
  LoadResult result;
  const std::string stem = path.stem().string();
  std::string line;
  size_t line_no = 0;
  size_t non_blank = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++non_blank;
    SentencePair pair;
    const bool ok = format == CorpusFormat::kTsv
                         ? ParseTsvLine(line, &pair.source_text, &pair.target_text)
                         : ParseJsonLine(line, &pair);
    if (!ok || !unicode::IsValidUtf8(pair.source_text) ||
        !unicode::IsValidUtf8(pair.target_text)) {
      ++result.malformed;
      continue;
    }
    if (pair.id.empty()) pair.id = fmt::format("{}:{}", stem, line_no);
    result.pairs.push_back(std::move(pair));
  }
  if (in.bad()) throw std::runtime_error("error reading corpus: " + path.string());
  if (result.malformed > 0) {
    spdlog::warn("{}: skipped {} malformed line(s)", path.string(), result.malformed);
  }
  if (2 * result.malformed > non_blank) {
    throw std::runtime_error("corpus likely mis-formatted");
  }
  return result;
}

std::string ToJsonl(const std::vector<SentencePair>& pairs) {
  std::string out;
  for (const SentencePair& p : pairs) {
    nlohmann::ordered_json j;
    j["id"] = p.id;
    j["source_text"] = p.source_text;
    j["target_text"] = p.target_text;
    j["flags"] = p.flags;
    out += j.dump();
    out += '\n';
  }
  return out;
}

void WriteJsonl(const std::filesystem::path& path,
                const std::vector<SentencePair>& pairs) {
  WriteTextFile(path, ToJsonl(pairs));
}

std::vector<SentencePair> FilterPairs(const std::vector<SentencePair>& pairs,
                                      int min_len, int max_len, Stage stage) {
  if (min_len < 0 || max_len < min_len) {
    throw std::invalid_argument("FilterPairs: invalid length bounds");
  }
  std::vector<SentencePair> out;
  for (const SentencePair& p : pairs) {
    if (p.source_text.empty() || p.target_text.empty()) continue;
    if (stage == Stage::kA) {
      SentencePair q = p;
      std::string nfd = unicode::ToNfd(q.source_text);
      if (nfd != q.source_text) {
        q.source_text = std::move(nfd);
        AddFlag(q.flags, "normalized:nfd");
      }
      if (unicode::CharLength(q.source_text) > static_cast<size_t>(max_len)) {
        q.source_text = TruncateCodePoints(q.source_text, max_len);
        AddFlag(q.flags, "truncated");
      }
      if (q.source_text.empty()) continue;
      out.push_back(std::move(q));
    } else {
      const size_t n = unicode::CharLength(p.source_text);
      if (n < static_cast<size_t>(min_len) || n > static_cast<size_t>(max_len)) continue;
      out.push_back(p);
    }
  }
  return out;
}

std::vector<TemplateId> AllTemplates() {
  return {TemplateId::kBulletPointify, TemplateId::kTranslateToEnglish,
          TemplateId::kSummarizeInEnglish, TemplateId::kQaAboutText};
}

std::string TemplateName(TemplateId t) {
  switch (t) {
    case TemplateId::kBulletPointify: return "bullet_pointify";
    case TemplateId::kTranslateToEnglish: return "translate_to_english";
    case TemplateId::kSummarizeInEnglish: return "summarize_in_english";
    case TemplateId::kQaAboutText: return "qa_about_text";
  }
  throw std::invalid_argument("unknown template");
}

TemplateId ParseTemplate(std::string_view name) {
  for (TemplateId t : AllTemplates()) {
    if (TemplateName(t) == name) return t;
  }
  throw std::invalid_argument(fmt::format("unknown template: {}", name));
}

std::string TemplateInstruction(TemplateId t) {
  switch (t) {
    case TemplateId::kBulletPointify: return "List the sentences as bullet points in English:";
    case TemplateId::kTranslateToEnglish: return "Translate to English:";
    case TemplateId::kSummarizeInEnglish: return "Summarize in English:";
    case TemplateId::kQaAboutText: return "Ask and answer a question about the text:";
  }
  throw std::invalid_argument("unknown template");
}

std::vector<std::string> SplitSentences(std::string_view text) {
  std::vector<std::string> out;
  size_t start = 0;
  size_t i = 0;
  while (i < text.size()) {
    size_t end = std::string_view::npos;
    if (text[i] == '.' || text[i] == '!' || text[i] == '?') {
      end = i + 1;
    } else if (text.substr(i, kKhmerFullStop.size()) == kKhmerFullStop) {
      end = i + kKhmerFullStop.size();
    }
    if (end == std::string_view::npos) {
      ++i;
      continue;
    }
    std::string_view s = Trim(text.substr(start, end - start));
    if (!s.empty()) out.emplace_back(s);
    start = i = end;
  }
  std::string_view rest = Trim(text.substr(start));
  if (!rest.empty()) out.emplace_back(rest);
  return out;
}

std::string MakeTarget(const SentencePair& pair, TemplateId t) {
  const std::string& text = pair.target_text;
  switch (t) {
    case TemplateId::kTranslateToEnglish:
      return text;
    case TemplateId::kBulletPointify: {
      std::string out;
      for (const std::string& s : SplitSentences(text)) {
        if (!out.empty()) out += '\n';
        out += "- " + s;
      }
      return out;
    }
    case TemplateId::kSummarizeInEnglish: {
      auto sentences = SplitSentences(text);
      return sentences.empty() ? std::string() : sentences.front();
    }
    case TemplateId::kQaAboutText: {
      std::string_view s = Trim(text);
      std::string_view word = s.substr(0, s.find_first_of(" \t\n"));
      while (!word.empty() && std::string_view(".,!?;:").find(word.back()) !=
                                  std::string_view::npos) {
        word.remove_suffix(1);
      }
      return fmt::format("Q: what is the first word? A: {}", word);
    }
  }
  throw std::invalid_argument("unknown template");
}

RenderedInstruction RenderInstruction(const SentencePair& pair, TemplateId t,
                                      int num_slots) {
  if (num_slots < 1) throw std::invalid_argument("num_slots must be >= 1");
  RenderedInstruction r;
  r.prompt = "User:" + TemplateInstruction(t);
  for (int k = 0; k < num_slots; ++k) r.prompt += SlotToken(k);
  r.prompt += " Assistant:";
  r.target = MakeTarget(pair, t);
  return r;
}

nlohmann::json CipherCorpusConfig::ToJson() const {
  return {{"vocab", vocab},         {"cipher_map", cipher_map},
          {"n_pairs", n_pairs},     {"seed", seed},
          {"min_words", min_words}, {"max_words", max_words},
          {"max_sentences", max_sentences}};
}

CipherCorpusConfig CipherCorpusConfig::FromJson(const nlohmann::json& j) {
  CipherCorpusConfig c;
  c.vocab = j.value("vocab", c.vocab);
  c.cipher_map = j.value("cipher_map", c.cipher_map);
  c.n_pairs = j.value("n_pairs", c.n_pairs);
  c.seed = j.value("seed", c.seed);
  c.min_words = j.value("min_words", c.min_words);
  c.max_words = j.value("max_words", c.max_words);
  c.max_sentences = j.value("max_sentences", c.max_sentences);
  return c;
}

const std::vector<std::string>& DefaultCipherVocab() {
  static const std::vector<std::string> kVocab = {
      "the",  "a",     "cat",  "dog",  "bird",  "fish", "king",  "queen",
      "tree", "river", "sees", "eats", "likes", "big",  "small", "red"};
  return kVocab;
}

std::map<std::string, std::string> MakeCipherMap(
    const std::vector<std::string>& vocab, uint64_t seed) {
  if (vocab.empty()) throw std::invalid_argument("cipher vocabulary is empty");
  Rng rng(SplitSeed(seed, "data/cipher_map"));
  const uint64_t alphabet = kLastConsonant - kFirstConsonant + 1;
  std::map<std::string, std::string> map;
  std::set<std::string> used;
  for (const std::string& word : vocab) {
    if (map.contains(word)) throw std::invalid_argument("duplicate vocabulary word: " + word);
    std::string code;
    do {
      const int len = 3 + static_cast<int>(rng.Index(3));
      std::u32string cps;
      for (int i = 0; i < len; ++i) {
        cps.push_back(kFirstConsonant + static_cast<char32_t>(rng.Index(alphabet)));
      }
      code = unicode::EncodeUtf8(cps);
    } while (used.contains(code));
    used.insert(code);
    map.emplace(word, std::move(code));
  }
  return map;
}

std::vector<SentencePair> GenerateCipherCorpus(const CipherCorpusConfig& config) {
  const std::vector<std::string>& vocab =
      config.vocab.empty() ? DefaultCipherVocab() : config.vocab;
  if (vocab.empty()) throw std::invalid_argument("cipher vocabulary is empty");
  if (config.min_words < 1 || config.max_words < config.min_words ||
      config.max_sentences < 1 || config.n_pairs < 0) {
    throw std::invalid_argument("invalid cipher corpus config");
  }
  std::map<std::string, std::string> map =
      config.cipher_map.empty() ? MakeCipherMap(vocab, config.seed) : config.cipher_map;
  std::set<std::string> codes;
  for (const std::string& w : vocab) {
    auto it = map.find(w);
    if (it == map.end()) throw std::invalid_argument("cipher map lacks word: " + w);
    if (!codes.insert(it->second).second) {
      throw std::invalid_argument("cipher map is not injective");
    }
  }

  Rng rng(SplitSeed(config.seed, "data/cipher_corpus"));
  std::set<std::string> seen;
  std::vector<SentencePair> pairs;
  const size_t max_attempts = 100 * static_cast<size_t>(config.n_pairs) + 1000;
  for (size_t attempt = 0;
       pairs.size() < static_cast<size_t>(config.n_pairs) && attempt < max_attempts;
       ++attempt) {
    const int sentences = 1 + static_cast<int>(rng.Index(config.max_sentences));
    std::string target, source;
    for (int s = 0; s < sentences; ++s) {
      const int words = config.min_words +
                        static_cast<int>(rng.Index(config.max_words - config.min_words + 1));
      for (int w = 0; w < words; ++w) {
        const std::string& word = vocab[rng.Index(vocab.size())];
        if (!target.empty()) {
          target += ' ';
          source += ' ';
        }
        target += word;
        source += map.at(word);
      }
      target += '.';
      source += kKhmerFullStop;
    }
    if (!seen.insert(target).second) continue;
    pairs.push_back({fmt::format("cipher-{:05d}", pairs.size()), std::move(source),
                     std::move(target), {}});
  }
  if (pairs.size() < static_cast<size_t>(config.n_pairs)) {
    throw std::runtime_error("cannot generate enough distinct cipher sentences");
  }
  return pairs;
}

std::string Decipher(std::string_view source,
                     const std::map<std::string, std::string>& cipher_map) {
  std::map<std::string, std::string, std::less<>> inverse;
  for (const auto& [word, code] : cipher_map) inverse.emplace(code, word);
  std::string out;
  size_t pos = 0;
  while (pos <= source.size()) {
    size_t end = source.find(' ', pos);
    if (end == std::string_view::npos) end = source.size();
    std::string_view token = source.substr(pos, end - pos);
    bool stop = false;
    if (token.ends_with(kKhmerFullStop)) {
      token.remove_suffix(kKhmerFullStop.size());
      stop = true;
    }
    auto it = inverse.find(token);
    if (it == inverse.end()) {
      throw std::invalid_argument(fmt::format("unknown pseudo-word at byte {}", pos));
    }
    if (!out.empty()) out += ' ';
    out += it->second;
    if (stop) out += '.';
    pos = end + 1;
  }
  return out;
}

}  // namespace slotbridge
