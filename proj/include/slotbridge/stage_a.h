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

// First-stage alignment: trains the projector so that projected encoder
// sentence vectors match frozen-decoder teacher states.

#ifndef SLOTBRIDGE_STAGE_A_H_
#define SLOTBRIDGE_STAGE_A_H_

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "slotbridge/data.h"
#include "slotbridge/losses.h"
#include "slotbridge/models.h"
#include "slotbridge/optimizer.h"
#include "slotbridge/projector.h"

namespace slotbridge {

const std::vector<std::string>& DefaultInstructionPool();

struct StageAConfig {
  int batch_size = 32;
  int steps = 2000;
  double learning_rate = 1e-4;
  double weight_decay = 0.01;
  double warmup_fraction = 0.05;
  LossWeights weights;
  size_t queue_capacity = NegativeQueue::kDefaultCapacity;
  int hard_k = 256;
  // Queue entries more similar than this to a batch teacher are not used as
  // negatives. nullopt disables the guard.
  std::optional<double> false_negative_guard = 0.999;
  uint64_t seed = 0;
  std::vector<std::string> instruction_pool = DefaultInstructionPool();
  HiddenOptions teacher;
  int projector_hidden = 3072;
  double dropout = 0.10;

  void Validate() const;
  nlohmann::json ToJson() const;
  static StageAConfig FromJson(const nlohmann::json& j);
};

// Teacher prompt for a pair: the instruction followed by the English side.
std::string TeacherPromptFor(const SentencePair& pair, std::string_view instruction);

// Teacher vector of a pair under one instruction.
RowVector PairTeacher(const FrozenModels& models, const SentencePair& pair,
                      std::string_view instruction, const HiddenOptions& opts);

struct StageAReport {
  int step = 0;  // 1-based index of the update this report describes
  double nce = 0.0;
  double dir = 0.0;
  double norm = 0.0;
  double total = 0.0;
  int hard_negatives = 0;
  size_t queue_size = 0;  // after the push
};

class StageATrainer {
 public:
  // Throws std::invalid_argument for an empty dataset or one smaller than a
  // batch.
  StageATrainer(FrozenModels models, std::vector<SentencePair> pairs,
                StageAConfig config);

  // One update. Throws NumericError naming the step and batch ids when a
  // loss is not finite; parameters are left untouched in that case.
  StageAReport Step();
  // Steps until config.steps updates have been applied. Frozen weights are
  // re-hashed at every epoch boundary; a change throws std::logic_error.
  void Run(const std::function<void(const StageAReport&)>& on_step = {});

  int step() const { return step_; }
  const StageAConfig& config() const { return config_; }
  const Projector& projector() const { return projector_; }
  Projector& projector() { return projector_; }
  const NegativeQueue& queue() const { return queue_; }
  const std::vector<StageAReport>& curve() const { return curve_; }
  // Pair indices of the batch used by the update with 0-based index step.
  std::vector<int> BatchIndices(int step) const;

  // Everything needed to continue the run bit-exactly: projector, optimizer
  // moments, queue contents, step and loss curve.
  TensorBundle Checkpoint() const;
  void Restore(const TensorBundle& bundle);

 private:
  const RowVector& Teacher(int pair, int instruction);
  void AuditFrozen() const;

  FrozenModels models_;
  std::vector<SentencePair> pairs_;
  StageAConfig config_;
  Projector projector_;
  AdamW optimizer_;
  NegativeQueue queue_;
  Matrix sources_;  // pooled encoder vectors, one row per pair
  std::vector<std::vector<std::optional<RowVector>>> teachers_;
  std::string encoder_digest_;
  std::string decoder_digest_;
  std::vector<StageAReport> curve_;
  int step_ = 0;
};

// "step,nce,dir,norm,total" plus one row per report.
std::string StageACurveCsv(const std::vector<StageAReport>& curve);

// Projector stored in a stage_a checkpoint.
Projector LoadStageAProjector(const std::filesystem::path& path);

}  // namespace slotbridge

#endif  // SLOTBRIDGE_STAGE_A_H_
