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

#include "slotbridge/stage_b.h"

#include <cmath>
#include <stdexcept>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "slotbridge/checkpoint.h"
#include "slotbridge/errors.h"
#include "slotbridge/rng.h"
#include "slotbridge/stage_a.h"

namespace slotbridge {
namespace {

// Temporarily switches the LoRA factors to constants.
class FrozenLoraScope {
 public:
  explicit FrozenLoraScope(LoraAdapterSet& lora) : lora_(lora), was_(lora.trainable()) {
    lora_.set_trainable(false);
  }
  ~FrozenLoraScope() { lora_.set_trainable(was_); }

 private:
  LoraAdapterSet& lora_;
  bool was_;
};

Var InjectedLoss(Graph& g, const FrozenModels& models, StageBModules& modules,
                 const StageBExample& ex, const RowVector& p, Var* mean_slot) {
  Var slots = ExpandSlots(g, modules.expander(), modules.adapter(), g.Constant(Matrix(p)));
  if (mean_slot != nullptr) *mean_slot = ops::MeanRows(slots);
  Var rows = InjectSlots(g, *models.decoder, ex.input_ids, models.slot_ids, slots);
  DecoderTrace trace = models.decoder->Forward(g, rows, &modules.lora());
  return SftLoss(models.decoder->Logits(g, trace.final_hidden), ex.labels);
}

// The slot positions keep their base embedding rows.
double ZeroedLoss(const FrozenModels& models, StageBModules& modules,
                  const StageBExample& ex) {
  FrozenLoraScope scope(modules.lora());
  Graph g;
  Var rows = g.Constant(models.decoder->EmbedTokens(ex.input_ids));
  DecoderTrace trace = models.decoder->Forward(g, rows, &modules.lora());
  return SftLoss(models.decoder->Logits(g, trace.final_hidden), ex.labels).scalar();
}

nlohmann::json LoraToJson(const LoraConfig& c) {
  std::vector<std::string> targets;
  for (LoraTarget t : c.targets) targets.push_back(LoraTargetName(t));
  return {{"rank", c.rank},       {"alpha", c.alpha},   {"targets", targets},
          {"layers", c.layers},   {"init_std", c.init_std}};
}

LoraConfig LoraFromJson(const nlohmann::json& j) {
  LoraConfig c;
  c.rank = j.value("rank", c.rank);
  c.alpha = j.value("alpha", c.alpha);
  if (j.contains("targets")) {
    c.targets.clear();
    for (const auto& t : j.at("targets")) c.targets.push_back(ParseLoraTarget(t.get<std::string>()));
  }
  c.layers = j.value("layers", c.layers);
  c.init_std = j.value("init_std", c.init_std);
  return c;
}

}  // namespace

void StageBConfig::Validate() const {
  if (num_slots < 1) throw std::invalid_argument("stage_b.num_slots must be >= 1");
  if (contrast_every < 1) throw std::invalid_argument("stage_b.contrast_every must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("stage_b.batch_size must be >= 1");
  if (steps < 0) throw std::invalid_argument("stage_b.steps must be >= 0");
  if (!(learning_rate > 0.0)) {
    throw std::invalid_argument("stage_b.learning_rate must be positive");
  }
  if (adapter_bottleneck < 1) {
    throw std::invalid_argument("stage_b.adapter_bottleneck must be >= 1");
  }
  if (lora.rank < 1) throw std::invalid_argument("stage_b.lora.rank must be >= 1");
  if (templates.empty()) throw std::invalid_argument("stage_b.templates must not be empty");
  weights.Validate();
}

nlohmann::json StageBConfig::ToJson() const {
  std::vector<std::string> names;
  for (TemplateId t : templates) names.push_back(TemplateName(t));
  return {{"num_slots", num_slots},
          {"contrast_every", contrast_every},
          {"weights", weights.ToJson()},
          {"lora", LoraToJson(lora)},
          {"adapter_bottleneck", adapter_bottleneck},
          {"batch_size", batch_size},
          {"steps", steps},
          {"learning_rate", learning_rate},
          {"weight_decay", weight_decay},
          {"warmup_fraction", warmup_fraction},
          {"seed", seed},
          {"templates", names},
          {"teacher_instruction", teacher_instruction},
          {"teacher_layer", teacher.layer},
          {"teacher_post_norm", teacher.post_norm}};
}

StageBConfig StageBConfig::FromJson(const nlohmann::json& j) {
  StageBConfig c;
  c.num_slots = j.value("num_slots", c.num_slots);
  c.contrast_every = j.value("contrast_every", c.contrast_every);
  if (j.contains("weights")) c.weights = LossWeights::FromJson(j.at("weights"));
  if (j.contains("lora")) c.lora = LoraFromJson(j.at("lora"));
  c.adapter_bottleneck = j.value("adapter_bottleneck", c.adapter_bottleneck);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.steps = j.value("steps", c.steps);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.warmup_fraction = j.value("warmup_fraction", c.warmup_fraction);
  c.seed = j.value("seed", c.seed);
  if (j.contains("templates")) {
    c.templates.clear();
    for (const auto& t : j.at("templates")) c.templates.push_back(ParseTemplate(t.get<std::string>()));
  }
  c.teacher_instruction = j.value("teacher_instruction", c.teacher_instruction);
  c.teacher.layer = j.value("teacher_layer", c.teacher.layer);
  c.teacher.post_norm = j.value("teacher_post_norm", c.teacher.post_norm);
  c.Validate();
  return c;
}

std::optional<StageBExample> MakeStageBExample(const FrozenModels& models,
                                               const SentencePair& pair, TemplateId t,
                                               const StageBConfig& config) {
  const RenderedInstruction r = RenderInstruction(pair, t, config.num_slots);
  std::vector<int> prompt = models.tokenizer->Encode(r.prompt);
  std::vector<int> target = models.tokenizer->Encode(r.target);
  if (target.empty()) {
    spdlog::warn("pair {}: empty {} response, skipped", pair.id, TemplateName(t));
    return std::nullopt;
  }
  if (models.slot_ids.size() != static_cast<size_t>(config.num_slots)) {
    throw std::invalid_argument("tokenizer slot count differs from stage_b.num_slots");
  }
  try {
    FindSlotPositions(prompt, models.slot_ids);
  } catch (const std::invalid_argument& e) {
    spdlog::warn("pair {}: {}, skipped", pair.id, e.what());
    return std::nullopt;
  }
  target.push_back(models.eos_id);
  StageBExample ex;
  ex.pair_id = pair.id;
  ex.template_id = t;
  ex.input_ids = prompt;
  ex.input_ids.insert(ex.input_ids.end(), target.begin(), target.end());
  ex.labels.assign(ex.input_ids.size(), -1);
  // Position i predicts token i + 1; only response tokens are supervised.
  for (size_t i = prompt.size(); i < ex.input_ids.size(); ++i) ex.labels[i - 1] = ex.input_ids[i];
  ex.source = EncodeSource(models, pair.source_text);
  ex.teacher = PairTeacher(models, pair, config.teacher_instruction, config.teacher);
  return ex;
}

StageBModules::StageBModules(const StageBConfig& config, const FrozenDecoder& decoder)
    : StageBModules(config, decoder, Rng(SplitSeed(config.seed, "stage_b/modules"))) {}

StageBModules::StageBModules(const StageBConfig& config, const FrozenDecoder& decoder,
                             Rng&& rng)
    : expander_(decoder.hidden_dim(), config.num_slots, MedianEmbeddingNorm(decoder), rng),
      adapter_(decoder.hidden_dim(), config.adapter_bottleneck, rng),
      lora_(config.lora, decoder.shape(), rng) {}

std::vector<Parameter*> StageBModules::Parameters() {
  std::vector<Parameter*> out = expander_.Parameters();
  for (Parameter* p : adapter_.Parameters()) out.push_back(p);
  for (Parameter* p : lora_.Parameters()) out.push_back(p);
  return out;
}

std::vector<const Parameter*> StageBModules::Parameters() const {
  std::vector<const Parameter*> out = expander_.Parameters();
  for (const Parameter* p : adapter_.Parameters()) out.push_back(p);
  for (const Parameter* p : lora_.Parameters()) out.push_back(p);
  return out;
}

std::string StageBModules::Digest() const {
  TensorHasher h;
  for (const Parameter* p : Parameters()) h.Add(p->name, p->value);
  return h.Finish();
}

void StageBModules::AppendTo(TensorBundle& bundle) const {
  bundle.meta["num_slots"] = expander_.num_slots();
  bundle.meta["dim"] = expander_.dim();
  bundle.meta["scale"] = expander_.scale();
  for (const Parameter* p : Parameters()) bundle.Add(p->name, p->value);
}

StageBModules StageBModules::FromBundle(const TensorBundle& bundle,
                                        const StageBConfig& config,
                                        const FrozenDecoder& decoder) {
  StageBModules m(config, decoder);
  for (Parameter* p : m.Parameters()) {
    const Matrix& v = bundle.Get(p->name);
    if (v.rows() != p->value.rows() || v.cols() != p->value.cols()) {
      throw std::invalid_argument("stage_b tensor shape mismatch: " + p->name);
    }
    p->value = v;
  }
  return m;
}

Var SftLoss(Var logits, std::span<const int> labels) {
  bool any = false;
  for (int l : labels) any = any || l >= 0;
  if (!any) throw std::invalid_argument("no response tokens");
  return ops::CrossEntropy(logits, labels);
}

ExampleLosses EvaluateExample(const FrozenModels& models, const Projector& projector,
                              StageBModules& modules, const StageBExample& example) {
  ExampleLosses out;
  {
    FrozenLoraScope scope(modules.lora());
    Graph g;
    out.injected = InjectedLoss(g, models, modules, example,
                                projector.Project(example.source), nullptr)
                       .scalar();
  }
  out.zeroed = ZeroedLoss(models, modules, example);
  return out;
}

std::vector<StageBExample> MakeEvalExamples(const FrozenModels& models,
                                            const std::vector<SentencePair>& pairs,
                                            const StageBConfig& config) {
  std::vector<StageBExample> out;
  for (size_t i = 0; i < pairs.size(); ++i) {
    const TemplateId t = config.templates[i % config.templates.size()];
    if (auto ex = MakeStageBExample(models, pairs[i], t, config)) out.push_back(std::move(*ex));
  }
  return out;
}

StageBTrainer::StageBTrainer(FrozenModels models, const Projector& projector,
                             const std::vector<SentencePair>& pairs, StageBConfig config)
    : models_(std::move(models)),
      projector_(projector),
      config_((config.Validate(), std::move(config))),
      modules_(config_, *models_.decoder),
      optimizer_(
          AdamWConfig{.learning_rate = config_.learning_rate,
                      .weight_decay = config_.weight_decay,
                      .warmup_fraction = config_.warmup_fraction,
                      .total_steps = config_.steps},
          modules_.Parameters()) {
  if (projector_.config().input_dim != models_.encoder->hidden_dim() ||
      projector_.config().output_dim != models_.decoder->hidden_dim()) {
    throw std::invalid_argument("projector dims do not match the frozen models");
  }
  for (const SentencePair& pair : pairs) {
    for (TemplateId t : config_.templates) {
      if (auto ex = MakeStageBExample(models_, pair, t, config_)) examples_.push_back(std::move(*ex));
    }
  }
  if (examples_.size() < static_cast<size_t>(config_.batch_size)) {
    throw std::invalid_argument(fmt::format(
        "stage B has {} usable examples, fewer than batch_size {}", examples_.size(),
        config_.batch_size));
  }
  encoder_digest_ = models_.encoder->WeightsDigest();
  decoder_digest_ = models_.decoder->WeightsDigest();
  projector_digest_ = projector_.Digest();
}

StageBReport StageBTrainer::Step() {
  const int n = static_cast<int>(examples_.size());
  const int per_epoch = n / config_.batch_size;
  const int epoch = step_ / per_epoch;
  const int offset = (step_ % per_epoch) * config_.batch_size;
  const std::vector<int> perm =
      Rng(SplitSeed(config_.seed, "stage_b/epoch", static_cast<uint64_t>(epoch))).Permutation(n);

  StageBReport report;
  report.step = step_ + 1;
  report.contrast_active = report.step % config_.contrast_every == 0;
  report.examples = config_.batch_size;

  Graph g;
  std::vector<Var> sft, contrast, mean_slots;
  Matrix teachers(config_.batch_size, models_.decoder->hidden_dim());
  int used = 0;
  for (int b = 0; b < config_.batch_size; ++b) {
    const StageBExample& ex = examples_[perm[offset + b]];
    Var mean_slot;
    Var loss = InjectedLoss(g, models_, modules_, ex, projector_.Project(ex.source), &mean_slot);
    const double zero = ZeroedLoss(models_, modules_, ex);
    if (loss.scalar() < zero) ++used;
    sft.push_back(loss);
    if (report.contrast_active) {
      contrast.push_back(UsageContrast(loss, zero, config_.weights.lambda_contrast));
    }
    mean_slots.push_back(mean_slot);
    teachers.row(b) = ex.teacher;
  }
  report.usage_rate = static_cast<double>(used) / config_.batch_size;

  Var sft_mean = ops::Mean(ops::ConcatRows(sft));
  AuxTerms aux = SlotAlignmentAux(g, ops::ConcatRows(mean_slots), g.ConstantRef(teachers),
                                  config_.weights);
  Var total = ops::Add(sft_mean, aux.total);
  if (report.contrast_active) {
    Var c = ops::Mean(ops::ConcatRows(contrast));
    report.contrast = c.scalar();
    total = ops::Add(total, c);
  }
  report.sft = sft_mean.scalar();
  report.aux_cos = aux.cos_term.scalar();
  report.aux_nce = aux.nce_term.scalar();
  report.total = total.scalar();
  if (!std::isfinite(report.total)) {
    throw NumericError(fmt::format(
        "stage B loss is not finite at step {} (sft={}, contrast={}, aux_cos={}, aux_nce={})",
        report.step, report.sft, report.contrast, report.aux_cos, report.aux_nce));
  }
  g.Backward(total);
  optimizer_.Step();
  ++step_;
  curve_.push_back(report);
  return report;
}

void StageBTrainer::AuditFrozen() const {
  if (models_.encoder->WeightsDigest() != encoder_digest_ ||
      models_.decoder->WeightsDigest() != decoder_digest_ ||
      projector_.Digest() != projector_digest_) {
    throw std::logic_error("frozen weights changed during stage B");
  }
}

void StageBTrainer::Run(const std::function<void(const StageBReport&)>& on_step) {
  const int per_epoch = static_cast<int>(examples_.size()) / config_.batch_size;
  while (step_ < config_.steps) {
    if (step_ % per_epoch == 0) AuditFrozen();
    const StageBReport r = Step();
    if (on_step) on_step(r);
  }
  AuditFrozen();
}

TensorBundle StageBTrainer::Checkpoint() const {
  TensorBundle bundle;
  bundle.kind = "stage_b";
  const nlohmann::json config = config_.ToJson();
  bundle.meta["config"] = config;
  bundle.meta["config_hash"] = Sha256Hex(config.dump());
  bundle.meta["step"] = step_;
  bundle.meta["encoder_digest"] = encoder_digest_;
  bundle.meta["decoder_digest"] = decoder_digest_;
  bundle.meta["projector_digest"] = projector_digest_;
  modules_.AppendTo(bundle);
  return bundle;
}

std::string StageBCurveCsv(const std::vector<StageBReport>& curve) {
  std::string out = "step,sft,contrast,aux_cos,aux_nce,total,usage_rate\n";
  for (const StageBReport& r : curve) {
    out += fmt::format("{},{},{},{},{},{},{}\n", r.step, r.sft, r.contrast, r.aux_cos,
                       r.aux_nce, r.total, r.usage_rate);
  }
  return out;
}

StageBConfig StageBConfigOf(const TensorBundle& bundle) {
  if (bundle.kind != "stage_b") throw std::invalid_argument("not a stage_b checkpoint");
  return StageBConfig::FromJson(bundle.meta.at("config"));
}

}  // namespace slotbridge
