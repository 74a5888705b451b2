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

// Second stage: instruction fine-tuning with the projected vector expanded
// into K injected slots, LoRA on the frozen decoder, a usage contrast and
// slot alignment auxiliaries.

#ifndef SLOTBRIDGE_STAGE_B_H_
#define SLOTBRIDGE_STAGE_B_H_

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "slotbridge/data.h"
#include "slotbridge/lora.h"
#include "slotbridge/losses.h"
#include "slotbridge/models.h"
#include "slotbridge/optimizer.h"
#include "slotbridge/projector.h"

namespace slotbridge {

struct StageBConfig {
  int num_slots = 8;
  int contrast_every = 3;
  LossWeights weights;
  LoraConfig lora;
  int adapter_bottleneck = 256;
  int batch_size = 8;
  int steps = 500;
  double learning_rate = 1e-4;
  double weight_decay = 0.01;
  double warmup_fraction = 0.05;
  uint64_t seed = 0;
  std::vector<TemplateId> templates = AllTemplates();
  // Instruction of the teacher used by the alignment auxiliaries.
  std::string teacher_instruction = "Read this sentence: ";
  HiddenOptions teacher;

  void Validate() const;
  nlohmann::json ToJson() const;
  static StageBConfig FromJson(const nlohmann::json& j);
};

// One rendered training or evaluation example.
struct StageBExample {
  std::string pair_id;
  TemplateId template_id = TemplateId::kTranslateToEnglish;
  std::vector<int> input_ids;  // prompt followed by target and <eos>
  std::vector<int> labels;     // next-token ids on response positions, else -1
  RowVector source;            // pooled encoder vector of the foreign side
  RowVector teacher;           // teacher vector for the auxiliaries
};

// Renders pair with template t. Returns nullopt (and logs a warning) when
// the tokenized prompt does not hold every slot token exactly once in order
// or the response is empty.
std::optional<StageBExample> MakeStageBExample(const FrozenModels& models,
                                               const SentencePair& pair, TemplateId t,
                                               const StageBConfig& config);

// Trainable second-stage modules.
class StageBModules {
 public:
  // Scale starts at the median embedding row norm of the decoder.
  StageBModules(const StageBConfig& config, const FrozenDecoder& decoder);

  SlotExpander& expander() { return expander_; }
  VectorAdapter& adapter() { return adapter_; }
  LoraAdapterSet& lora() { return lora_; }
  const SlotExpander& expander() const { return expander_; }
  const LoraAdapterSet& lora() const { return lora_; }
  std::vector<Parameter*> Parameters();
  std::vector<const Parameter*> Parameters() const;
  std::string Digest() const;

  void AppendTo(TensorBundle& bundle) const;
  // Rebuilds modules saved by AppendTo; config supplies K, LoRA and adapter
  // shapes and must match the bundle.
  static StageBModules FromBundle(const TensorBundle& bundle, const StageBConfig& config,
                                  const FrozenDecoder& decoder);

 private:
  StageBModules(const StageBConfig& config, const FrozenDecoder& decoder, Rng&& rng);

  SlotExpander expander_;
  VectorAdapter adapter_;
  LoraAdapterSet lora_;
};

// Mean cross-entropy of logits against labels (entries < 0 ignored).
// Throws std::invalid_argument("no response tokens") when every label is
// ignored.
Var SftLoss(Var logits, std::span<const int> labels);

struct ExampleLosses {
  double injected = 0.0;
  double zeroed = 0.0;
};

// Value-only losses of one example with the slots injected and with the slot
// rows restored to their base embeddings.
ExampleLosses EvaluateExample(const FrozenModels& models, const Projector& projector,
                              StageBModules& modules, const StageBExample& example);

struct StageBReport {
  int step = 0;  // 1-based
  double sft = 0.0;
  bool contrast_active = false;
  double contrast = 0.0;
  double aux_cos = 0.0;
  double aux_nce = 0.0;
  double total = 0.0;
  double usage_rate = 0.0;  // fraction of the batch with sft < zeroed
  int examples = 0;
};

class StageBTrainer {
 public:
  // The projector is frozen for the whole run. Pairs that cannot be rendered
  // are skipped; throws std::invalid_argument when none remain.
  StageBTrainer(FrozenModels models, const Projector& projector,
                const std::vector<SentencePair>& pairs, StageBConfig config);

  StageBReport Step();
  void Run(const std::function<void(const StageBReport&)>& on_step = {});

  int step() const { return step_; }
  StageBModules& modules() { return modules_; }
  const StageBModules& modules() const { return modules_; }
  const std::vector<StageBReport>& curve() const { return curve_; }
  const std::vector<StageBExample>& examples() const { return examples_; }
  const StageBConfig& config() const { return config_; }

  // kind "stage_b": the modules plus the config and its hash.
  TensorBundle Checkpoint() const;

 private:
  void AuditFrozen() const;

  FrozenModels models_;
  const Projector& projector_;
  StageBConfig config_;
  std::vector<StageBExample> examples_;
  StageBModules modules_;
  AdamW optimizer_;
  std::string encoder_digest_, decoder_digest_, projector_digest_;
  std::vector<StageBReport> curve_;
  int step_ = 0;
};

// Renders eval pairs with templates cycling through config.templates.
std::vector<StageBExample> MakeEvalExamples(const FrozenModels& models,
                                            const std::vector<SentencePair>& pairs,
                                            const StageBConfig& config);

// "step,sft,contrast,aux_cos,aux_nce,total,usage_rate" plus one row per step.
std::string StageBCurveCsv(const std::vector<StageBReport>& curve);

// Config stored in a stage_b checkpoint, for rebuilding its modules.
StageBConfig StageBConfigOf(const TensorBundle& bundle);

}  // namespace slotbridge

#endif  // SLOTBRIDGE_STAGE_B_H_
