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

#include "slotbridge/pipeline.h"

#include <cstdlib>
#include <set>

#include <fmt/format.h>
#include <fmt/ranges.h>
#include <spdlog/spdlog.h>

#include "slotbridge/checkpoint.h"
#include "slotbridge/errors.h"
#include "slotbridge/evaluation.h"
#include "slotbridge/rng.h"
#include "slotbridge/token_analysis.h"

namespace slotbridge {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr const char* kModels = "models.bin";
constexpr const char* kStageAData = "data/stage_a.jsonl";
constexpr const char* kStageBData = "data/stage_b.jsonl";
constexpr const char* kEvalData = "data/eval.jsonl";
constexpr const char* kStageACkpt = "stage_a.ckpt";
constexpr const char* kStageBCkpt = "stage_b.ckpt";

json ModelsToJson(const ToyModelConfig& c) {
  return {{"encoder_dim", c.encoder_dim}, {"decoder_dim", c.decoder_dim},
          {"layers", c.layers},           {"heads", c.heads},
          {"vocab_size", c.vocab_size},   {"num_slots", c.num_slots},
          {"mlp_ratio", c.mlp_ratio},     {"seed", c.seed}};
}

ToyModelConfig ModelsFromJson(const json& j) {
  ToyModelConfig c;
  c.encoder_dim = j.value("encoder_dim", c.encoder_dim);
  c.decoder_dim = j.value("decoder_dim", c.decoder_dim);
  c.layers = j.value("layers", c.layers);
  c.heads = j.value("heads", c.heads);
  c.vocab_size = j.value("vocab_size", c.vocab_size);
  c.num_slots = j.value("num_slots", c.num_slots);
  c.mlp_ratio = j.value("mlp_ratio", c.mlp_ratio);
  c.seed = j.value("seed", c.seed);
  return c;
}

json SummaryJson(const Summary& s) {
  return {{"mean", s.mean}, {"median", s.median}, {"p95", s.p95}};
}

std::string CorpusFormatName(CorpusFormat f) {
  return f == CorpusFormat::kTsv ? "tsv" : "jsonl";
}

// Tracks one command's inputs and outputs and writes its manifest.
class Run {
 public:
  Run(std::string command, const PipelineConfig& config, const CommandOptions& opts,
      std::vector<std::string> outputs)
      : command_(std::move(command)), config_(config), opts_(opts),
        outputs_(std::move(outputs)) {
    outputs_.push_back(ManifestPath());
    for (const std::string& rel : outputs_) {
      const fs::path p = opts_.out / rel;
      if (fs::exists(p) && !opts_.overwrite) {
        throw UsageError(fmt::format("{} already exists; pass --overwrite to replace it",
                                     p.string()));
      }
    }
  }

  // Path of a required artifact inside the run directory.
  fs::path Require(const std::string& rel, std::string_view producer) {
    const fs::path p = opts_.out / rel;
    if (!fs::exists(p)) {
      throw MissingArtifactError(
          fmt::format("missing artifact {} (produced by {})", p.string(), producer));
    }
    inputs_.push_back({rel, Sha256File(p)});
    return p;
  }

  void AddExternalInput(const fs::path& p) {
    if (!fs::exists(p)) {
      throw MissingArtifactError(fmt::format("missing artifact {}", p.string()));
    }
    inputs_.push_back({p.string(), Sha256File(p)});
  }

  fs::path Out(const std::string& rel) const { return opts_.out / rel; }

  json Finish() {
    json seeds = {{"root", config_.seed},
                  {"models", config_.models.seed},
                  {"corpus", config_.corpus.seed},
                  {"stage_a", config_.stage_a.seed},
                  {"stage_b", config_.stage_b.seed}};
    json manifest = {{"command", command_},
                     {"version", std::string(kVersion)},
                     {"config_hash", config_.Hash()},
                     {"config", config_.ToJson()},
                     {"seeds", seeds},
                     {"inputs", json::array()},
                     {"outputs", json::array()}};
    for (const auto& [path, digest] : inputs_) {
      manifest["inputs"].push_back({{"path", path}, {"sha256", digest}});
    }
    for (const std::string& rel : outputs_) {
      if (rel == ManifestPath()) continue;
      manifest["outputs"].push_back({{"path", rel}, {"sha256", Sha256File(Out(rel))}});
    }
    WriteTextFile(Out(ManifestPath()), manifest.dump(2) + "\n");
    return manifest;
  }

 private:
  std::string ManifestPath() const { return "manifests/" + command_ + ".json"; }

  std::string command_;
  const PipelineConfig& config_;
  CommandOptions opts_;
  std::vector<std::string> outputs_;
  std::vector<std::pair<std::string, std::string>> inputs_;
};

std::vector<SentencePair> ReadPairs(const fs::path& path) {
  return LoadParallel(path, CorpusFormat::kJsonl).pairs;
}

}  // namespace

PipelineConfig PipelineConfig::FromJson(const json& j) {
  static const std::set<std::string> kKeys = {
      "seed",          "models",        "corpus",        "corpus_path",
      "corpus_format", "stage_a_pairs", "stage_b_pairs", "eval_pairs",
      "stage_a",       "stage_b",       "eval_instruction", "usage_pairs",
      "context_limit"};
  if (!j.is_object()) throw UsageError("config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!kKeys.contains(key)) throw UsageError(fmt::format("unknown config key: {}", key));
  }
  PipelineConfig c;
  try {
    c.seed = j.value("seed", c.seed);
    if (j.contains("models")) c.models = ModelsFromJson(j.at("models"));
    if (j.contains("corpus")) c.corpus = CipherCorpusConfig::FromJson(j.at("corpus"));
    if (auto it = j.find("corpus_path"); it != j.end() && !it->is_null()) {
      c.corpus_path = it->get<std::string>();
    }
    if (j.contains("corpus_format")) {
      c.corpus_format = ParseCorpusFormat(j.at("corpus_format").get<std::string>());
    }
    c.stage_a_pairs = j.value("stage_a_pairs", c.stage_a_pairs);
    c.stage_b_pairs = j.value("stage_b_pairs", c.stage_b_pairs);
    c.eval_pairs = j.value("eval_pairs", c.eval_pairs);
    if (j.contains("stage_a")) c.stage_a = StageAConfig::FromJson(j.at("stage_a"));
    if (j.contains("stage_b")) c.stage_b = StageBConfig::FromJson(j.at("stage_b"));
    c.eval_instruction = j.value("eval_instruction", c.eval_instruction);
    c.usage_pairs = j.value("usage_pairs", c.usage_pairs);
    c.context_limit = j.value("context_limit", c.context_limit);
  } catch (const json::exception& e) {
    throw UsageError(fmt::format("bad config value: {}", e.what()));
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return c;
}

json PipelineConfig::ToJson() const {
  return {{"seed", seed},
          {"models", ModelsToJson(models)},
          {"corpus", corpus.ToJson()},
          {"corpus_path", corpus_path ? json(*corpus_path) : json()},
          {"corpus_format", CorpusFormatName(corpus_format)},
          {"stage_a_pairs", stage_a_pairs},
          {"stage_b_pairs", stage_b_pairs},
          {"eval_pairs", eval_pairs},
          {"stage_a", stage_a.ToJson()},
          {"stage_b", stage_b.ToJson()},
          {"eval_instruction", eval_instruction},
          {"usage_pairs", usage_pairs},
          {"context_limit", context_limit}};
}

void PipelineConfig::Finalize() {
  models.seed = SplitSeed(seed, "models");
  corpus.seed = SplitSeed(seed, "corpus");
  stage_a.seed = SplitSeed(seed, "stage_a");
  stage_b.seed = SplitSeed(seed, "stage_b");
  try {
    models.Validate();
    stage_a.Validate();
    stage_b.Validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  if (stage_b.num_slots != models.num_slots) {
    throw UsageError(fmt::format("stage_b.num_slots ({}) must equal models.num_slots ({})",
                                 stage_b.num_slots, models.num_slots));
  }
  if (stage_a_pairs < 1 || stage_b_pairs < 1 || eval_pairs < 2) {
    throw UsageError("split sizes must be positive and eval_pairs >= 2");
  }
  if (usage_pairs < 1) throw UsageError("usage_pairs must be >= 1");
  if (context_limit < 1) throw UsageError("context_limit must be >= 1");
}

std::string PipelineConfig::Hash() const { return Sha256Hex(ToJson().dump()); }

PipelineConfig LoadPipelineConfig(const fs::path& path,
                                  std::optional<uint64_t> seed_override) {
  PipelineConfig c;
  if (!path.empty()) {
    if (!fs::exists(path)) {
      throw MissingArtifactError(fmt::format("missing config file {}", path.string()));
    }
    json j;
    try {
      j = json::parse(ReadTextFile(path));
    } catch (const json::parse_error& e) {
      throw UsageError(fmt::format("{}: {}", path.string(), e.what()));
    }
    c = PipelineConfig::FromJson(j);
  }
  if (seed_override) c.seed = *seed_override;
  c.Finalize();
  return c;
}

json CmdGenData(const PipelineConfig& config, const CommandOptions& opts) {
  Run run("gen-data", config, opts, {kModels, kStageAData, kStageBData, kEvalData});
  std::vector<SentencePair> pairs;
  if (config.corpus_path) {
    run.AddExternalInput(*config.corpus_path);
    pairs = LoadParallel(*config.corpus_path, config.corpus_format).pairs;
  } else {
    CipherCorpusConfig cc = config.corpus;
    cc.n_pairs = std::max(cc.n_pairs,
                          config.stage_a_pairs + config.stage_b_pairs + config.eval_pairs);
    pairs = GenerateCipherCorpus(cc);
  }
  const size_t need = static_cast<size_t>(config.stage_a_pairs) + config.stage_b_pairs +
                      config.eval_pairs;
  if (pairs.size() < need) {
    throw UsageError(fmt::format("corpus has {} pairs; the configured splits need {}",
                                 pairs.size(), need));
  }
  auto slice = [&](size_t begin, size_t n) {
    return std::vector<SentencePair>(pairs.begin() + begin, pairs.begin() + begin + n);
  };
  const size_t a = config.stage_a_pairs, b = config.stage_b_pairs;
  const auto stage_a = FilterPairs(slice(0, a), kMinSourceChars, kMaxSourceChars, Stage::kA);
  const auto stage_b = FilterPairs(slice(a, b), kMinSourceChars, kMaxSourceChars, Stage::kB);
  const auto eval = FilterPairs(slice(a + b, config.eval_pairs), kMinSourceChars,
                                kMaxSourceChars, Stage::kA);
  spdlog::info("gen-data: {} stage A, {} stage B, {} eval pairs", stage_a.size(),
               stage_b.size(), eval.size());

  SaveToyModels(BuildToyModels(config.models), run.Out(kModels));
  WriteJsonl(run.Out(kStageAData), stage_a);
  WriteJsonl(run.Out(kStageBData), stage_b);
  WriteJsonl(run.Out(kEvalData), eval);
  return run.Finish();
}

json CmdTrainA(const PipelineConfig& config, const CommandOptions& opts) {
  Run run("train-a", config, opts, {kStageACkpt, "stage_a_curve.csv"});
  const ToyModels models = LoadToyModels(run.Require(kModels, "gen-data"));
  const auto pairs = ReadPairs(run.Require(kStageAData, "gen-data"));
  StageATrainer trainer(ViewOf(models), pairs, config.stage_a);
  trainer.Run([&](const StageAReport& r) {
    if (r.step % 100 == 0 || r.step == config.stage_a.steps) {
      spdlog::info("train-a step {}: total {:.4f} nce {:.4f} dir {:.4f} norm {:.4f}",
                   r.step, r.total, r.nce, r.dir, r.norm);
    }
  });
  WriteBundle(run.Out(kStageACkpt), trainer.Checkpoint());
  WriteTextFile(run.Out("stage_a_curve.csv"), StageACurveCsv(trainer.curve()));
  return run.Finish();
}

json CmdTrainB(const PipelineConfig& config, const CommandOptions& opts) {
  Run run("train-b", config, opts, {kStageBCkpt, "stage_b_curve.csv"});
  const ToyModels models = LoadToyModels(run.Require(kModels, "gen-data"));
  const Projector projector = LoadStageAProjector(run.Require(kStageACkpt, "train-a"));
  const auto pairs = ReadPairs(run.Require(kStageBData, "gen-data"));
  StageBTrainer trainer(ViewOf(models), projector, pairs, config.stage_b);
  trainer.Run([&](const StageBReport& r) {
    if (r.step % 25 == 0 || r.step == config.stage_b.steps) {
      spdlog::info("train-b step {}: sft {:.4f} total {:.4f} usage {:.3f}", r.step, r.sft,
                   r.total, r.usage_rate);
    }
  });
  WriteBundle(run.Out(kStageBCkpt), trainer.Checkpoint());
  WriteTextFile(run.Out("stage_b_curve.csv"), StageBCurveCsv(trainer.curve()));
  return run.Finish();
}

json CmdEval(const PipelineConfig& config, const CommandOptions& opts) {
  Run run("eval", config, opts,
          {"reports/retrieval.json", "reports/retrieval.tsv", "reports/ranks.tsv",
           "reports/usage.json", "reports/usage.tsv", "reports/tokens.csv",
           "reports/tokens.json"});
  const ToyModels models = LoadToyModels(run.Require(kModels, "gen-data"));
  const Projector projector = LoadStageAProjector(run.Require(kStageACkpt, "train-a"));
  const TensorBundle stage_b = ReadBundle(run.Require(kStageBCkpt, "train-b"), "stage_b");
  const auto pairs = ReadPairs(run.Require(kEvalData, "gen-data"));
  const FrozenModels view = ViewOf(models);
  const std::string hash = config.Hash();

  const std::string instruction = config.eval_instruction.empty()
                                      ? config.stage_a.instruction_pool.at(0)
                                      : config.eval_instruction;
  const RetrievalResult retrieval =
      EvaluateRetrieval(pairs, view, projector, instruction, config.stage_a.teacher);
  spdlog::info("eval: R@1 {:.3f} R@10 {:.3f} MRR {:.3f} mean rank {:.2f} (n={})",
               retrieval.report.r_at_1, retrieval.report.r_at_10, retrieval.report.mrr,
               retrieval.report.mean_rank, retrieval.report.n);
  WriteTextFile(run.Out("reports/retrieval.json"),
                RetrievalReportJson(retrieval.report, hash).dump(2) + "\n");
  WriteTextFile(run.Out("reports/retrieval.tsv"), RetrievalReportTsv(retrieval.report, hash));
  WriteTextFile(run.Out("reports/ranks.tsv"), RankListTsv(pairs, retrieval.ranks));

  const StageBConfig b_config = StageBConfigOf(stage_b);
  StageBModules modules = StageBModules::FromBundle(stage_b, b_config, *models.decoder);
  const size_t n_usage = std::min<size_t>(config.usage_pairs, pairs.size());
  const std::vector<SentencePair> usage_pairs(pairs.begin(), pairs.begin() + n_usage);
  const UsageComparison usage = CompareInjectedVsZeroed(
      MakeEvalExamples(view, usage_pairs, b_config), view, projector, modules);
  spdlog::info("eval: usage rate {:.3f}, mean gain {:.4f}", usage.usage_rate,
               usage.mean_gain);
  WriteTextFile(run.Out("reports/usage.json"), UsageJson(usage, hash).dump(2) + "\n");
  WriteTextFile(run.Out("reports/usage.tsv"), UsageTsv(usage));

  const InflationReport tokens = MeasureInflation(pairs, *models.tokenizer);
  WriteTextFile(run.Out("reports/tokens.csv"), InflationCsv(tokens));
  const json tokens_json = {{"config_hash", hash},
                            {"tokenizer", "toy-char"},
                            {"n", tokens.pairs.size()},
                            {"excluded_empty", tokens.excluded_empty},
                            {"source_tokens_per_char", SummaryJson(tokens.source_tokens_per_char)},
                            {"target_tokens_per_char", SummaryJson(tokens.target_tokens_per_char)},
                            {"inflation_ratio", SummaryJson(tokens.inflation_ratio)}};
  WriteTextFile(run.Out("reports/tokens.json"), tokens_json.dump(2) + "\n");
  return run.Finish();
}

std::unique_ptr<Tokenizer> LoadAssetTokenizer() {
  const char* dir = std::getenv(kAssetDirEnv);
  if (dir == nullptr || *dir == '\0') return nullptr;
  const fs::path path = fs::path(dir) / "tokenizer.json";
  if (!fs::exists(path)) {
    throw MissingArtifactError(fmt::format("missing artifact {} ({} is set)",
                                           path.string(), kAssetDirEnv));
  }
  return std::make_unique<ByteBpeTokenizer>(ByteBpeTokenizer::FromTokenizerJson(path));
}

json CmdAnalyzeTokens(const PipelineConfig& config, const CommandOptions& opts) {
  Run run("analyze-tokens", config, opts,
          {"reports/analysis/inflation.csv", "reports/analysis/summary.json",
           "reports/analysis/split_chars.tsv"});
  const auto pairs = ReadPairs(run.Require(kEvalData, "gen-data"));
  std::unique_ptr<Tokenizer> tokenizer = LoadAssetTokenizer();
  std::string tokenizer_name = "toy-char";
  fs::path sentences_path;
  if (tokenizer) {
    const fs::path dir = std::getenv(kAssetDirEnv);
    run.AddExternalInput(dir / "tokenizer.json");
    tokenizer_name = "asset:tokenizer.json";
    if (fs::exists(dir / "sentences.json")) {
      sentences_path = dir / "sentences.json";
      run.AddExternalInput(sentences_path);
    }
  } else {
    tokenizer = std::make_unique<CharTokenizer>(config.models.num_slots);
  }

  const InflationReport report = MeasureInflation(pairs, *tokenizer);
  int overflow = 0;
  for (const PairInflation& p : report.pairs) {
    overflow += ComputeContextBudget(p.source.token_count, config.context_limit).overflow;
  }
  json summary = {{"config_hash", config.Hash()},
                  {"tokenizer", tokenizer_name},
                  {"n", report.pairs.size()},
                  {"excluded_empty", report.excluded_empty},
                  {"source_tokens_per_char", SummaryJson(report.source_tokens_per_char)},
                  {"target_tokens_per_char", SummaryJson(report.target_tokens_per_char)},
                  {"inflation_ratio", SummaryJson(report.inflation_ratio)},
                  {"context_limit", config.context_limit},
                  {"sources_over_context", overflow}};
  if (!sentences_path.empty()) {
    // name -> text; reported in the file's key order (sorted).
    json sentences = json::parse(ReadTextFile(sentences_path));
    json rows = json::array();
    for (const auto& [name, text] : sentences.items()) {
      const TextTokens t = CountTokens(text.get<std::string>(), *tokenizer);
      rows.push_back({{"name", name},
                      {"tokens", t.token_count},
                      {"chars", t.chars},
                      {"tokens_per_char", t.tokens_per_char}});
    }
    summary["reference_sentences"] = rows;
  }
  WriteTextFile(run.Out("reports/analysis/inflation.csv"), InflationCsv(report));
  WriteTextFile(run.Out("reports/analysis/summary.json"), summary.dump(2) + "\n");
  std::string split = "id\tbyte_begin\tbyte_end\tcharacter\ttokens\n";
  for (const SentencePair& p : pairs) {
    for (const CharacterTokens& c : AnnotateCharacters(p.source_text, *tokenizer)) {
      if (c.token_indices.size() < 2) continue;
      split += fmt::format("{}\t{}\t{}\t{}\t{}\n", p.id, c.byte_begin, c.byte_end,
                           c.character, fmt::join(c.token_indices, ","));
    }
  }
  WriteTextFile(run.Out("reports/analysis/split_chars.tsv"), split);
  return run.Finish();
}

}  // namespace slotbridge
