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

// Acceptance run: prints one PASS/FAIL line per criterion and exits nonzero
// if any criterion fails. Thresholds are fixed here and must not be tuned to
// make a run pass.

#include <sys/wait.h>

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "oracles/oracles.h"
#include "slotbridge/checkpoint.h"
#include "slotbridge/data.h"
#include "slotbridge/evaluation.h"
#include "slotbridge/half.h"
#include "slotbridge/lora.h"
#include "slotbridge/losses.h"
#include "slotbridge/models.h"
#include "slotbridge/pipeline.h"
#include "slotbridge/projector.h"
#include "slotbridge/stage_a.h"
#include "slotbridge/stage_b.h"
#include "slotbridge/token_analysis.h"
#include "slotbridge/tokenizer.h"

namespace slotbridge {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using oracle::RandomMatrix;
using oracle::ToMat;

const fs::path kConfigDir = SLOTBRIDGE_CONFIG_DIR;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string Num(double x, int precision = 4) {
  std::ostringstream os;
  os << std::setprecision(precision) << x;
  return os.str();
}

Outcome Guarded(const std::function<Outcome()>& fn) {
  try {
    return fn();
  } catch (const std::exception& e) {
    return {false, std::string("exception: ") + e.what()};
  }
}

// ---------------------------------------------------------------------------
// Toy end-to-end run shared by the Stage A, Stage B and frozen-audit lines.

struct ToyRun {
  Outcome stage_a, stage_b, frozen;
};

ToyRun RunToyPipeline() {
  ToyRun out;
  const fs::path dir = fs::temp_directory_path() / "slotbridge_acceptance_toy";
  fs::remove_all(dir);
  const PipelineConfig cfg = LoadPipelineConfig(kConfigDir / "toy.json", std::nullopt);
  auto read = [&](const char* rel) { return LoadParallel(dir / rel, CorpusFormat::kJsonl).pairs; };

  const auto start = std::chrono::steady_clock::now();
  CmdGenData(cfg, {.out = dir});
  const ToyModels models = LoadToyModels(dir / "models.bin");
  const FrozenModels view = ViewOf(models);
  const std::vector<SentencePair> train_a = read("data/stage_a.jsonl");
  const std::vector<SentencePair> train_b = read("data/stage_b.jsonl");
  const std::vector<SentencePair> eval = read("data/eval.jsonl");
  const std::string enc0 = models.encoder->WeightsDigest();
  const std::string dec0 = models.decoder->WeightsDigest();

  StageATrainer a(view, train_a, cfg.stage_a);
  a.Run();
  const RetrievalResult r = EvaluateRetrieval(eval, view, a.projector(),
                                              cfg.stage_a.instruction_pool.at(0),
                                              cfg.stage_a.teacher);
  const double minutes =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() / 60.0;
  const bool a_frozen = models.encoder->WeightsDigest() == enc0 &&
                        models.decoder->WeightsDigest() == dec0;
  out.stage_a.pass = r.report.n == 256 && train_a.size() == 2000 &&
                     a.step() <= 2000 && r.report.r_at_1 >= 0.50 &&
                     r.report.mean_rank <= 10.0 && minutes < 10.0;
  out.stage_a.detail = "pairs " + std::to_string(train_a.size()) + ", steps " +
                       std::to_string(a.step()) + ", R@1 " + Num(r.report.r_at_1) +
                       " (need >= 0.50, chance " + Num(1.0 / r.report.n) + "), mean rank " +
                       Num(r.report.mean_rank) + " (need <= 10), n " +
                       std::to_string(r.report.n) + ", " + Num(minutes, 3) + " min (need < 10)";

  WriteBundle(dir / "stage_a.ckpt", a.Checkpoint());
  const Projector projector = LoadStageAProjector(dir / "stage_a.ckpt");
  const std::string proj0 = projector.Digest();
  StageBTrainer b(view, projector, train_b, cfg.stage_b);
  b.Run();
  const size_t n_usage = std::min<size_t>(cfg.usage_pairs, eval.size());
  const std::vector<SentencePair> usage_pairs(eval.begin(), eval.begin() + n_usage);
  const std::vector<StageBExample> examples = MakeEvalExamples(view, usage_pairs, cfg.stage_b);
  const UsageComparison u = CompareInjectedVsZeroed(examples, view, projector, b.modules());

  StageBModules degenerate = StageBModules::FromBundle(b.Checkpoint(), cfg.stage_b,
                                                       *models.decoder);
  degenerate.expander().set_scale(0.0);
  degenerate.lora().ZeroB();
  size_t unequal = 0;
  for (const StageBExample& ex : examples) {
    const ExampleLosses l = EvaluateExample(view, projector, degenerate, ex);
    unequal += l.injected != l.zeroed;
  }
  out.stage_b.pass = !examples.empty() && u.usage_rate >= 0.6 && u.mean_gain > 0.0 &&
                     unequal == 0;
  out.stage_b.detail = "usage rate " + Num(u.usage_rate) + " (need >= 0.6), mean gain " +
                       Num(u.mean_gain) + " (need > 0), n " + std::to_string(examples.size()) +
                       "; degenerate scale=0, B=0: " + std::to_string(unequal) +
                       " of " + std::to_string(examples.size()) + " examples differ (need 0)";

  const bool b_frozen = models.encoder->WeightsDigest() == enc0 &&
                        models.decoder->WeightsDigest() == dec0 && projector.Digest() == proj0;
  out.frozen.pass = a_frozen && b_frozen;
  out.frozen.detail = std::string("encoder/decoder unchanged by stage A: ") +
                      (a_frozen ? "yes" : "no") + "; encoder/decoder/projector unchanged by " +
                      "stage B: " + (b_frozen ? "yes" : "no") + " (encoder " +
                      enc0.substr(0, 12) + ", decoder " + dec0.substr(0, 12) + ", projector " +
                      proj0.substr(0, 12) + ")";
  fs::remove_all(dir);
  return out;
}

// ---------------------------------------------------------------------------

Outcome LossOracles() {
  constexpr int kInstances = 200;
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 5.0);
  double worst = 0.0;
  const LossWeights w;
  for (int t = 0; t < kInstances; ++t) {
    const int n = 1 + t % 6, d = 2 + t % 7, m = t % 4;
    const double tau = 0.02 + 0.05 * (t % 3);
    const Matrix p = RandomMatrix(rng, n, d, 0.2 + t % 4), h = RandomMatrix(rng, n, d);
    const Matrix negs = RandomMatrix(rng, m + (n == 1 ? 1 : 0), d);
    Graph g;
    Var pv = g.Constant(p), hv = g.Constant(h);
    worst = std::max(worst, std::fabs(InfoNceSymmetric(g, pv, hv, negs, tau).scalar() -
                                      oracle::InfoNce(ToMat(p), ToMat(h), ToMat(negs), tau)));
    worst = std::max(worst, std::fabs(DirectionLoss(g, pv, hv).scalar() -
                                      oracle::Direction(ToMat(p), ToMat(h))));
    worst = std::max(worst, std::fabs(LogNormLoss(g, pv, hv).scalar() -
                                      oracle::LogNorm(ToMat(p), ToMat(h))));
    const double sft = u(rng), zero = u(rng);
    worst = std::max(worst, std::fabs(UsageContrast(g.Constant(Matrix::Constant(1, 1, sft)),
                                                    zero, w.lambda_contrast)
                                          .scalar() -
                                      oracle::Contrast(sft, zero, w.lambda_contrast)));
    const AuxTerms aux = SlotAlignmentAux(g, pv, hv, w);
    worst = std::max(worst, std::fabs(aux.cos_term.scalar() - oracle::CosAux(ToMat(p), ToMat(h))));
    worst = std::max(worst, std::fabs(aux.nce_term.scalar() -
                                      oracle::NceAux(ToMat(p), ToMat(h), w.temperature)));
  }
  return {worst <= 1e-6, std::to_string(kInstances) +
                             " instances each of InfoNCE, direction, log-norm, usage contrast, "
                             "cosine and NCE auxiliaries; max abs error " +
                             Num(worst, 3) + " (need <= 1e-6)"};
}

double CheckGrad(const std::vector<Parameter*>& params, const std::function<Var(Graph&)>& build) {
  return oracle::GradCheck(
      params,
      [&] {
        Graph g;
        return build(g).scalar();
      },
      [&] {
        Graph g;
        g.Backward(build(g));
      });
}

Outcome GradientChecks() {
  std::mt19937_64 gen(7);
  auto randomize = [&](const std::vector<Parameter*>& ps, double std) {
    for (Parameter* p : ps) p->value = RandomMatrix(gen, p->value.rows(), p->value.cols(), std);
  };
  std::map<std::string, double> worst;

  Rng init(1);
  Projector proj({.input_dim = 6, .hidden_dim = 8, .output_dim = 5, .dropout = 0.1}, init);
  randomize(proj.Parameters(), 0.5);
  const Matrix z = RandomMatrix(gen, 3, 6), wp = RandomMatrix(gen, 3, 5);
  worst["projector"] = CheckGrad(proj.Parameters(), [&](Graph& g) {
    Rng dropout(5);
    return ops::Sum(ops::Hadamard(proj.Forward(g, g.Constant(z), true, &dropout),
                                  g.Constant(wp)));
  });

  SlotExpander expander(8, 4, 0.9, init);
  VectorAdapter adapter(8, 4, init);
  randomize(adapter.Parameters(), 0.4);
  const Matrix pin = RandomMatrix(gen, 1, 8), ws = RandomMatrix(gen, 4, 8);
  auto slots_loss = [&](Graph& g) {
    return ops::Sum(ops::Hadamard(ExpandSlots(g, expander, adapter, g.Constant(pin)),
                                  g.Constant(ws)));
  };
  std::vector<Parameter*> maps;
  for (Parameter* p : expander.Parameters()) {
    if (p != &expander.scale_parameter()) maps.push_back(p);
  }
  worst["expander"] = CheckGrad(maps, slots_loss);
  worst["adapter"] = CheckGrad(adapter.Parameters(), slots_loss);
  worst["scale"] = CheckGrad({&expander.scale_parameter()}, slots_loss);

  ToyModelConfig tiny;
  tiny.encoder_dim = 8;
  tiny.decoder_dim = 8;
  tiny.layers = 1;
  tiny.heads = 2;
  tiny.num_slots = 2;
  tiny.seed = 3;
  const ToyModels models = BuildToyModels(tiny);
  LoraConfig lc;
  lc.rank = 2;
  lc.alpha = 2.0;
  LoraAdapterSet lora(lc, models.decoder->shape(), init);
  randomize(lora.Parameters(), 0.3);
  const std::vector<int> ids = models.tokenizer->Encode("ab cd");
  const std::vector<int> labels = {-1, ids[2], ids[3], ids[4], -1};
  const Matrix rows = models.decoder->EmbedTokens(ids);
  worst["lora"] = CheckGrad(lora.Parameters(), [&](Graph& g) {
    Var h = models.decoder->Forward(g, g.Constant(rows), &lora).final_hidden;
    return ops::CrossEntropy(models.decoder->Logits(g, h), labels);
  });

  bool pass = true;
  std::string detail = "max relative error";
  for (const auto& [name, err] : worst) {
    pass = pass && err < 1e-4;
    detail += " " + name + " " + Num(err, 3);
  }
  return {pass, detail + " (need < 1e-4; dims <= 8)"};
}

Outcome QueueSemantics() {
  std::mt19937_64 rng(99);
  size_t total_ops = 0, mines = 0, mismatches = 0;
  for (int trial = 0; trial < 24; ++trial) {
    const int d = 2 + trial % 7;
    const size_t cap = 1 + static_cast<size_t>(trial) * 5;
    const int ops = trial % 3 == 0 ? 1000 : 100 + 37 * trial;
    NegativeQueue q(d, cap);
    oracle::ListQueue ref(cap);
    Matrix last;
    for (int op = 0; op < ops; ++op) {
      Matrix rows = RandomMatrix(rng, 1 + static_cast<int>(rng() % 4), d);
      if (last.rows() > 0 && rng() % 4 == 0) rows = last;
      if (rng() % 2 == 0) {
        q.Push(rows);
        ref.Push(ToMat(rows));
        last = rows;
      } else {
        const size_t k = rng() % (cap + 2);
        std::optional<double> guard;
        if (rng() % 3 == 0) guard = 0.3;
        const Matrix got = q.Mine(rows, k, guard);
        const oracle::Mat want = ref.Mine(ToMat(rows), k, guard);
        ++mines;
        if (static_cast<size_t>(got.rows()) != want.size()) {
          ++mismatches;
          continue;
        }
        for (size_t i = 0; i < want.size(); ++i) {
          for (int j = 0; j < d; ++j) mismatches += got(i, j) != want[i][j];
        }
      }
      ++total_ops;
    }
    const oracle::Mat contents(ref.entries().begin(), ref.entries().end());
    const Matrix stored = q.Contents();
    if (static_cast<size_t>(stored.rows()) != contents.size()) {
      ++mismatches;
    } else {
      for (size_t i = 0; i < contents.size(); ++i) {
        for (int j = 0; j < d; ++j) mismatches += stored(i, j) != contents[i][j];
      }
    }
  }
  size_t half_bad = 0;
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 50000; ++i) {
    const double x = u(rng) * std::ldexp(1.0, -(i % 26));
    half_bad += HalfToDouble(DoubleToHalf(x)) != oracle::RoundHalf(x);
  }
  return {mismatches == 0 && half_bad == 0,
          std::to_string(total_ops) + " push/mine ops over 24 sequences (up to 1000 each), " +
              std::to_string(mines) + " mines; " + std::to_string(mismatches) +
              " mismatches vs list reference; " + std::to_string(half_bad) +
              " of 50000 half roundings differ from the definition table"};
}

Outcome RetrievalMetrics() {
  std::mt19937_64 gen(5);
  int exact = 0, invariants = 0;
  for (int t = 0; t < 200; ++t) {
    const int n = 1 + static_cast<int>(gen() % 64);
    Matrix s = RandomMatrix(gen, n, n);
    if (t % 2) s = (s.array() * 2.0).round() / 2.0;  // force ties
    const std::vector<int> ranks = GoldRanks(s);
    const RetrievalReport r = ReportFromRanks(ranks);
    const std::vector<int> want_ranks = oracle::SortRanks(ToMat(s));
    const oracle::Metrics want = oracle::MetricsFromRanks(want_ranks);
    exact += ranks == want_ranks && r.r_at_1 == want.r1 && r.r_at_5 == want.r5 &&
             r.r_at_10 == want.r10 && std::fabs(r.mrr - want.mrr) <= 1e-12 &&
             std::fabs(r.mean_rank - want.mean_rank) <= 1e-12;
    invariants += r.r_at_1 <= r.r_at_5 && r.r_at_5 <= r.r_at_10 && r.mrr >= r.r_at_1;
  }
  return {exact == 200 && invariants == 200,
          std::to_string(exact) + "/200 matrices (up to 64x64, half with ties) match the sort "
                                  "oracle; invariants hold on " +
              std::to_string(invariants) + "/200"};
}

Outcome SlotNorms() {
  std::mt19937_64 gen(8);
  std::uniform_real_distribution<double> scale(-4.0, 4.0);
  constexpr int kDim = 64, kSlots = 8;
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    Rng init(static_cast<uint64_t>(t));
    SlotExpander expander(kDim, kSlots, scale(gen), init);
    VectorAdapter adapter(kDim, 16, init);
    for (Parameter* p : adapter.Parameters()) {
      p->value = RandomMatrix(gen, p->value.rows(), p->value.cols(), 0.2);
    }
    const Matrix slots =
        ExpandSlotsValue(expander, adapter, RandomMatrix(gen, 1, kDim, 0.1 + t % 7));
    const double want = std::fabs(expander.scale()) * std::sqrt(static_cast<double>(kDim));
    for (int k = 0; k < kSlots; ++k) {
      worst = std::max(worst, std::fabs(slots.row(k).norm() - want) / want);
    }
  }
  return {worst <= 1e-5, "1000 inputs, K=8, dim 64: max relative deviation from "
                         "|scale|*sqrt(dim) " +
                             Num(worst, 3) + " (need <= 1e-5)"};
}

// Byte-level tokenizer without merges: one token per UTF-8 byte.
ByteBpeTokenizer ByteTokenizer() {
  const auto sym = oracle::ByteSymbols();
  std::unordered_map<std::string, int> vocab;
  for (int b = 0; b < 256; ++b) vocab[sym[b]] = b;
  return ByteBpeTokenizer(vocab, {});
}

size_t CodePoints(const std::string& s) {
  size_t n = 0;
  for (unsigned char c : s) n += (c & 0xC0) != 0x80;
  return n;
}

Outcome Tokenization() {
  const char* asset_dir = std::getenv(kAssetDirEnv);
  if (asset_dir != nullptr && *asset_dir != '\0') {
    const std::unique_ptr<Tokenizer> tok = LoadAssetTokenizer();
    const json sentences = json::parse(ReadTextFile(fs::path(asset_dir) / "sentences.json"));
    const std::vector<std::pair<std::string, int>> want = {
        {"english", 16}, {"khmer_translit", 35}, {"khmer", 104}};
    bool pass = true;
    std::string detail = "asset tokenizer:";
    for (const auto& [name, count] : want) {
      const TextTokens t = CountTokens(sentences.at(name).get<std::string>(), *tok);
      pass = pass && t.token_count == count;
      detail += " " + name + " " + std::to_string(t.token_count) + " (need " +
                std::to_string(count) + ", " + Num(t.tokens_per_char, 2) + " tok/char)";
    }
    return {pass, detail};
  }

  // No asset: recompute every statistic independently on the toy corpus.
  CipherCorpusConfig cc;
  cc.n_pairs = 256;
  cc.seed = 17;
  const std::vector<SentencePair> pairs = GenerateCipherCorpus(cc);
  const CharTokenizer chars(8);
  const ByteBpeTokenizer bytes = ByteTokenizer();
  size_t bad = 0;
  for (const Tokenizer* tok : std::initializer_list<const Tokenizer*>{&chars, &bytes}) {
    const bool byte_level = tok == &bytes;
    const InflationReport report = MeasureInflation(pairs, *tok);
    std::vector<double> src, tgt, ratio;
    for (size_t i = 0; i < pairs.size(); ++i) {
      const SentencePair& p = pairs[i];
      const size_t sc = CodePoints(p.source_text), tc = CodePoints(p.target_text);
      const size_t st = byte_level ? p.source_text.size() : sc;
      const size_t tt = byte_level ? p.target_text.size() : tc;
      const PairInflation& row = report.pairs[i];
      bad += row.source.token_count != static_cast<int>(st) ||
             row.source.chars != static_cast<int>(sc) ||
             row.target.token_count != static_cast<int>(tt) ||
             row.target.chars != static_cast<int>(tc) ||
             std::fabs(row.inflation_ratio - static_cast<double>(st) / tt) > 1e-12;
      src.push_back(static_cast<double>(st) / sc);
      tgt.push_back(static_cast<double>(tt) / tc);
      ratio.push_back(static_cast<double>(st) / tt);
      size_t split = 0;
      for (const CharacterTokens& c : AnnotateCharacters(p.source_text, *tok)) {
        split += c.token_indices.size() > 1;
        bad += c.token_indices.size() != (byte_level ? c.character.size() : 1u);
      }
      bad += !byte_level && split != 0;
    }
    auto check = [&](std::vector<double> v, const Summary& s) {
      std::sort(v.begin(), v.end());
      double mean = 0.0;
      for (double x : v) mean += x / v.size();
      const size_t n = v.size();
      const double median = n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2;
      const double h = 0.95 * (n - 1);
      const size_t k = static_cast<size_t>(h);
      const double p95 = k + 1 < n ? v[k] + (h - k) * (v[k + 1] - v[k]) : v[k];
      bad += std::fabs(mean - s.mean) > 1e-9 || median != s.median ||
             std::fabs(p95 - s.p95) > 1e-12;
    };
    check(src, report.source_tokens_per_char);
    check(tgt, report.target_tokens_per_char);
    check(ratio, report.inflation_ratio);
  }
  bad += ComputeContextBudget(2100, 2048).remaining != 0 ||
         !ComputeContextBudget(2100, 2048).overflow ||
         ComputeContextBudget(100, 2048).remaining != 1948;
  return {bad == 0, "real tokenizer asset not supplied ($" + std::string(kAssetDirEnv) +
                        "), so the 16/35/104 counts were not checked; toy recompute oracle on "
                        "256 pairs with char and byte tokenizers: " +
                        std::to_string(bad) + " mismatches"};
}

// ---------------------------------------------------------------------------

int Shell(const std::string& cmd) {
  const int status = std::system((cmd + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome CliDeterminism() {
  const fs::path root = fs::temp_directory_path() / "slotbridge_acceptance_cli";
  fs::remove_all(root);
  const std::vector<std::string> commands = {"gen-data", "train-a", "train-b", "eval",
                                             "analyze-tokens"};
  std::map<std::string, std::string> digests[2];
  for (int rep = 0; rep < 2; ++rep) {
    const fs::path out = root / ("run" + std::to_string(rep));
    for (const std::string& cmd : commands) {
      const int code = Shell(std::string(SLOTBRIDGE_CLI) + " " + cmd + " --config " +
                             (kConfigDir / "smoke.json").string() + " --out " + out.string());
      if (code != 0) return {false, cmd + " exited with " + std::to_string(code)};
      const json m = json::parse(ReadTextFile(out / "manifests" / (cmd + ".json")));
      for (const json& o : m.at("outputs")) {
        const std::string rel = o.at("path").get<std::string>();
        // Recompute rather than trusting the manifest.
        const std::string digest = Sha256File(out / rel);
        if (digest != o.at("sha256").get<std::string>()) {
          return {false, "manifest digest of " + rel + " does not match the file"};
        }
        digests[rep][rel] = digest;
      }
    }
  }
  size_t differing = 0;
  for (const auto& [rel, digest] : digests[0]) differing += digests[1][rel] != digest;
  fs::remove_all(root);
  return {differing == 0 && digests[0].size() == digests[1].size() && !digests[0].empty(),
          std::to_string(commands.size()) + " commands run twice on smoke.json; " +
              std::to_string(digests[0].size()) + " artifacts, " + std::to_string(differing) +
              " differ"};
}

}  // namespace
}  // namespace slotbridge

int main() {
  using slotbridge::Guarded;
  using slotbridge::Outcome;
  std::cout << "slotbridge acceptance " << slotbridge::kVersion << std::endl;

  slotbridge::ToyRun toy;
  try {
    toy = slotbridge::RunToyPipeline();
  } catch (const std::exception& e) {
    const Outcome failed{false, std::string("exception: ") + e.what()};
    toy = {failed, failed, failed};
  }
  const std::vector<std::pair<std::string, Outcome>> substituted = {
      {"stage_a_toy_retrieval", toy.stage_a},
      {"stage_b_usage", toy.stage_b},
      {"loss_oracles", Guarded(slotbridge::LossOracles)},
      {"gradient_checks", Guarded(slotbridge::GradientChecks)},
      {"queue_semantics", Guarded(slotbridge::QueueSemantics)},
      {"retrieval_metrics", Guarded(slotbridge::RetrievalMetrics)},
      {"frozen_audit", toy.frozen},
      {"slot_norm_invariant", Guarded(slotbridge::SlotNorms)},
      {"tokenization_analysis", Guarded(slotbridge::Tokenization)},
      {"cli_determinism", Guarded(slotbridge::CliDeterminism)},
  };
  int passed = 0;
  for (const auto& [name, o] : substituted) passed += o.pass;

  // Full-scale numbers need XLM-R, LLaMA-3.2-1B and 100k ParaCrawl pairs and
  // are not attempted; this line stands for the substituted criteria.
  const Outcome full_scale{
      passed == static_cast<int>(substituted.size()),
      "full-scale retrieval and preference numbers not reproduced (need XLM-R, "
      "LLaMA-3.2-1B, 100k ParaCrawl pairs); substituted by the criteria below, " +
          std::to_string(passed) + "/" + std::to_string(substituted.size()) + " passed"};

  bool all = full_scale.pass;
  std::cout << (full_scale.pass ? "PASS" : "FAIL") << " full_scale_substitution: "
            << full_scale.detail << "\n";
  for (const auto& [name, o] : substituted) {
    std::cout << (o.pass ? "PASS" : "FAIL") << " " << name << ": " << o.detail << "\n";
    all = all && o.pass;
  }
  std::cout << std::flush;
  return all ? 0 : 1;
}
