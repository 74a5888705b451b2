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

// Config-driven commands behind the command-line tool. Every command reads
// its inputs from and writes its artifacts to one run directory and leaves a
// manifest listing the effective config, seeds and content digests.
//
// Run directory layout:
//   models.bin                 frozen toy encoder/decoder (gen-data)
//   data/{stage_a,stage_b,eval}.jsonl
//   stage_a.ckpt, stage_a_curve.csv
//   stage_b.ckpt, stage_b_curve.csv
//   reports/...                eval and analyze-tokens outputs
//   manifests/<command>.json

#ifndef SLOTBRIDGE_PIPELINE_H_
#define SLOTBRIDGE_PIPELINE_H_

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "slotbridge/data.h"
#include "slotbridge/models.h"
#include "slotbridge/stage_a.h"
#include "slotbridge/stage_b.h"

namespace slotbridge {

inline constexpr std::string_view kVersion = "0.1.0";
// Directory holding real tokenizer assets (tokenizer.json and, optionally,
// sentences.json) for analyze-tokens.
inline constexpr const char* kAssetDirEnv = "SLOTBRIDGE_ASSET_DIR";

struct PipelineConfig {
  // Root of every random stream. The seeds of the models, the corpus and
  // both trainers are derived from it and cannot be set separately.
  uint64_t seed = 0;
  ToyModelConfig models;
  CipherCorpusConfig corpus;
  // When set, gen-data splits this parallel file instead of generating the
  // cipher corpus.
  std::optional<std::string> corpus_path;
  CorpusFormat corpus_format = CorpusFormat::kTsv;
  int stage_a_pairs = 2000;
  int stage_b_pairs = 500;
  int eval_pairs = 256;
  StageAConfig stage_a;
  StageBConfig stage_b;
  // Teacher instruction for retrieval; empty means stage_a.instruction_pool[0].
  std::string eval_instruction;
  // Eval pairs rendered for the injected-versus-zeroed comparison.
  int usage_pairs = 64;
  int context_limit = 2048;

  // Unknown keys throw UsageError so typos do not silently fall back to
  // defaults. Seeds are re-derived after parsing.
  static PipelineConfig FromJson(const nlohmann::json& j);
  nlohmann::json ToJson() const;
  // Sets the per-consumer seeds from seed and validates all sections.
  void Finalize();
  // SHA-256 of the canonical dump of ToJson().
  std::string Hash() const;
};

// Defaults, then the file (if non-empty), then the seed override.
PipelineConfig LoadPipelineConfig(const std::filesystem::path& path,
                                  std::optional<uint64_t> seed_override);

struct CommandOptions {
  std::filesystem::path out = "run";
  bool overwrite = false;
};

// Each returns the manifest it wrote. Errors: UsageError for an existing
// output without overwrite, MissingArtifactError for an absent input,
// NumericError from training.
nlohmann::json CmdGenData(const PipelineConfig& config, const CommandOptions& opts);
nlohmann::json CmdTrainA(const PipelineConfig& config, const CommandOptions& opts);
nlohmann::json CmdTrainB(const PipelineConfig& config, const CommandOptions& opts);
nlohmann::json CmdEval(const PipelineConfig& config, const CommandOptions& opts);
nlohmann::json CmdAnalyzeTokens(const PipelineConfig& config, const CommandOptions& opts);

// Loads the tokenizer.json under the asset directory when the environment
// variable is set, else returns nullptr.
std::unique_ptr<Tokenizer> LoadAssetTokenizer();

}  // namespace slotbridge

#endif  // SLOTBRIDGE_PIPELINE_H_
