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

#include "slotbridge/stage_a.h"

#include <cmath>
#include <stdexcept>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "slotbridge/errors.h"
#include "slotbridge/rng.h"

namespace slotbridge {
namespace {

ProjectorConfig MakeProjectorConfig(const FrozenModels& m, const StageAConfig& c) {
  ProjectorConfig p;
  p.input_dim = m.encoder->hidden_dim();
  p.hidden_dim = c.projector_hidden;
  p.output_dim = m.decoder->hidden_dim();
  p.dropout = c.dropout;
  return p;
}

Projector InitialProjector(const FrozenModels& m, const StageAConfig& c) {
  c.Validate();
  if (m.encoder == nullptr || m.decoder == nullptr || m.tokenizer == nullptr) {
    throw std::invalid_argument("stage A needs an encoder, decoder and tokenizer");
  }
  Rng rng(SplitSeed(c.seed, "stage_a/projector"));
  return Projector(MakeProjectorConfig(m, c), rng);
}

AdamWConfig MakeAdamW(const StageAConfig& c) {
  AdamWConfig a;
  a.learning_rate = c.learning_rate;
  a.weight_decay = c.weight_decay;
  a.warmup_fraction = c.warmup_fraction;
  a.total_steps = c.steps;
  return a;
}

}  // namespace

const std::vector<std::string>& DefaultInstructionPool() {
  static const std::vector<std::string> kPool = {
      "Read this sentence: ", "Consider the text: ", "Here is a sentence: "};
  return kPool;
}

void StageAConfig::Validate() const {
  if (batch_size < 2) throw std::invalid_argument("stage_a.batch_size must be >= 2");
  if (steps < 0) throw std::invalid_argument("stage_a.steps must be >= 0");
  if (!(learning_rate > 0.0)) {
    throw std::invalid_argument("stage_a.learning_rate must be positive");
  }
  if (queue_capacity == 0) throw std::invalid_argument("stage_a.queue_capacity must be > 0");
  if (hard_k < 0) throw std::invalid_argument("stage_a.hard_k must be >= 0");
  if (instruction_pool.empty()) {
    throw std::invalid_argument("stage_a.instruction_pool must not be empty");
  }
  if (projector_hidden <= 0) {
    throw std::invalid_argument("stage_a.projector_hidden must be positive");
  }
  weights.Validate();
}

nlohmann::json StageAConfig::ToJson() const {
  nlohmann::json j = {{"batch_size", batch_size},
                      {"steps", steps},
                      {"learning_rate", learning_rate},
                      {"weight_decay", weight_decay},
                      {"warmup_fraction", warmup_fraction},
                      {"weights", weights.ToJson()},
                      {"queue_capacity", queue_capacity},
                      {"hard_k", hard_k},
                      {"seed", seed},
                      {"instruction_pool", instruction_pool},
                      {"teacher_layer", teacher.layer},
                      {"teacher_post_norm", teacher.post_norm},
                      {"projector_hidden", projector_hidden},
                      {"dropout", dropout}};
  j["false_negative_guard"] =
      false_negative_guard ? nlohmann::json(*false_negative_guard) : nlohmann::json();
  return j;
}

StageAConfig StageAConfig::FromJson(const nlohmann::json& j) {
  StageAConfig c;
  c.batch_size = j.value("batch_size", c.batch_size);
  c.steps = j.value("steps", c.steps);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.warmup_fraction = j.value("warmup_fraction", c.warmup_fraction);
  if (j.contains("weights")) c.weights = LossWeights::FromJson(j.at("weights"));
  c.queue_capacity = j.value("queue_capacity", c.queue_capacity);
  c.hard_k = j.value("hard_k", c.hard_k);
  if (auto it = j.find("false_negative_guard"); it != j.end()) {
    c.false_negative_guard =
        it->is_null() ? std::nullopt : std::optional<double>(it->get<double>());
  }
  c.seed = j.value("seed", c.seed);
  c.instruction_pool = j.value("instruction_pool", c.instruction_pool);
  c.teacher.layer = j.value("teacher_layer", c.teacher.layer);
  c.teacher.post_norm = j.value("teacher_post_norm", c.teacher.post_norm);
  c.projector_hidden = j.value("projector_hidden", c.projector_hidden);
  c.dropout = j.value("dropout", c.dropout);
  c.Validate();
  return c;
}

std::string TeacherPromptFor(const SentencePair& pair, std::string_view instruction) {
  return TeacherPrompt(std::string(instruction) + pair.target_text);
}

RowVector PairTeacher(const FrozenModels& models, const SentencePair& pair,
                      std::string_view instruction, const HiddenOptions& opts) {
  const std::vector<int> ids = models.tokenizer->Encode(TeacherPromptFor(pair, instruction));
  return ExtractTeacher(*models.decoder, ids, models.foreign_emb_id, opts).vector;
}

StageATrainer::StageATrainer(FrozenModels models, std::vector<SentencePair> pairs,
                             StageAConfig config)
    : models_(std::move(models)),
      pairs_(std::move(pairs)),
      config_(std::move(config)),
      projector_(InitialProjector(models_, config_)),
      optimizer_(MakeAdamW(config_), projector_.Parameters()),
      queue_(models_.decoder->hidden_dim(), config_.queue_capacity) {
  if (pairs_.empty()) throw std::invalid_argument("stage A dataset is empty");
  if (pairs_.size() < static_cast<size_t>(config_.batch_size)) {
    throw std::invalid_argument(fmt::format(
        "stage A dataset has {} pairs, fewer than batch_size {}", pairs_.size(),
        config_.batch_size));
  }
  sources_.resize(static_cast<Eigen::Index>(pairs_.size()), models_.encoder->hidden_dim());
  for (size_t i = 0; i < pairs_.size(); ++i) {
    sources_.row(static_cast<Eigen::Index>(i)) =
        EncodeSource(models_, pairs_[i].source_text);
  }
  teachers_.assign(pairs_.size(), std::vector<std::optional<RowVector>>(
                                      config_.instruction_pool.size()));
  encoder_digest_ = models_.encoder->WeightsDigest();
  decoder_digest_ = models_.decoder->WeightsDigest();
}

const RowVector& StageATrainer::Teacher(int pair, int instruction) {
  auto& slot = teachers_[pair][instruction];
  if (!slot) {
    slot = PairTeacher(models_, pairs_[pair], config_.instruction_pool[instruction],
                       config_.teacher);
  }
  return *slot;
}

std::vector<int> StageATrainer::BatchIndices(int step) const {
  const int n = static_cast<int>(pairs_.size());
  const int per_epoch = n / config_.batch_size;
  const int epoch = step / per_epoch;
  const int offset = (step % per_epoch) * config_.batch_size;
  Rng rng(SplitSeed(config_.seed, "stage_a/epoch", static_cast<uint64_t>(epoch)));
  const std::vector<int> perm = rng.Permutation(n);
  return std::vector<int>(perm.begin() + offset, perm.begin() + offset + config_.batch_size);
}

StageAReport StageATrainer::Step() {
  const std::vector<int> batch = BatchIndices(step_);
  Rng rng(SplitSeed(config_.seed, "stage_a/step", static_cast<uint64_t>(step_)));
  const Eigen::Index b = static_cast<Eigen::Index>(batch.size());
  Matrix z(b, sources_.cols());
  Matrix h(b, models_.decoder->hidden_dim());
  for (Eigen::Index i = 0; i < b; ++i) {
    const int instruction = static_cast<int>(rng.Index(config_.instruction_pool.size()));
    z.row(i) = sources_.row(batch[i]);
    h.row(i) = Teacher(batch[i], instruction);
  }

  // Mine before pushing so this step's teachers never act as their own
  // negatives.
  const Matrix hard = queue_.Mine(h, static_cast<size_t>(config_.hard_k),
                                  config_.false_negative_guard);

  Graph g;
  Var hv = g.ConstantRef(h);
  Var p = projector_.Forward(g, g.ConstantRef(z), /*training=*/true, &rng);
  Var nce = InfoNceSymmetric(g, p, hv, hard, config_.weights.temperature);
  Var dir = DirectionLoss(g, p, hv);
  Var norm = LogNormLoss(g, p, hv);
  Var total = ops::Add(nce, ops::Add(ops::Scale(dir, config_.weights.lambda_dir),
                                     ops::Scale(norm, config_.weights.lambda_norm)));

  StageAReport report;
  report.step = step_ + 1;
  report.nce = nce.scalar();
  report.dir = dir.scalar();
  report.norm = norm.scalar();
  report.total = total.scalar();
  report.hard_negatives = static_cast<int>(hard.rows());
  if (!std::isfinite(report.total)) {
    std::string ids;
    for (int i : batch) ids += (ids.empty() ? "" : ",") + pairs_[i].id;
    throw NumericError(fmt::format(
        "stage A loss is not finite at step {} (nce={}, dir={}, norm={}); batch: {}",
        report.step, report.nce, report.dir, report.norm, ids));
  }
  g.Backward(total);
  optimizer_.Step();
  queue_.Push(h);
  report.queue_size = queue_.size();
  ++step_;
  curve_.push_back(report);
  return report;
}

void StageATrainer::AuditFrozen() const {
  if (models_.encoder->WeightsDigest() != encoder_digest_ ||
      models_.decoder->WeightsDigest() != decoder_digest_) {
    throw std::logic_error("frozen encoder/decoder weights changed during stage A");
  }
}

void StageATrainer::Run(const std::function<void(const StageAReport&)>& on_step) {
  const int per_epoch = static_cast<int>(pairs_.size()) / config_.batch_size;
  while (step_ < config_.steps) {
    if (step_ % per_epoch == 0) AuditFrozen();
    const StageAReport r = Step();
    if (on_step) on_step(r);
  }
  AuditFrozen();
}

TensorBundle StageATrainer::Checkpoint() const {
  TensorBundle bundle;
  bundle.kind = "stage_a";
  bundle.meta["config"] = config_.ToJson();
  bundle.meta["step"] = step_;
  bundle.meta["encoder_digest"] = encoder_digest_;
  bundle.meta["decoder_digest"] = decoder_digest_;
  bundle.meta["projector_digest"] = projector_.Digest();
  nlohmann::json curve = nlohmann::json::array();
  for (const StageAReport& r : curve_) {
    curve.push_back({r.step, r.nce, r.dir, r.norm, r.total, r.hard_negatives, r.queue_size});
  }
  bundle.meta["curve"] = std::move(curve);
  projector_.AppendTo(bundle);
  optimizer_.AppendTo(bundle, "adam.");
  bundle.Add("queue", queue_.Contents());
  return bundle;
}

void StageATrainer::Restore(const TensorBundle& bundle) {
  if (bundle.kind != "stage_a") throw std::invalid_argument("not a stage_a checkpoint");
  if (bundle.meta.at("encoder_digest") != encoder_digest_ ||
      bundle.meta.at("decoder_digest") != decoder_digest_) {
    throw std::invalid_argument("checkpoint was trained against different frozen models");
  }
  Projector loaded = Projector::FromBundle(bundle);
  std::vector<Parameter*> dst = projector_.Parameters();
  std::vector<Parameter*> src = loaded.Parameters();
  for (size_t i = 0; i < dst.size(); ++i) {
    if (dst[i]->value.rows() != src[i]->value.rows() ||
        dst[i]->value.cols() != src[i]->value.cols()) {
      throw std::invalid_argument("checkpoint projector shape differs from config");
    }
    dst[i]->value = src[i]->value;
    dst[i]->ZeroGrad();
  }
  optimizer_.RestoreFrom(bundle, "adam.");
  queue_.Restore(bundle.Get("queue"));
  step_ = bundle.meta.at("step").get<int>();
  curve_.clear();
  for (const auto& row : bundle.meta.at("curve")) {
    StageAReport r;
    r.step = row[0];
    r.nce = row[1];
    r.dir = row[2];
    r.norm = row[3];
    r.total = row[4];
    r.hard_negatives = row[5];
    r.queue_size = row[6];
    curve_.push_back(r);
  }
}

std::string StageACurveCsv(const std::vector<StageAReport>& curve) {
  std::string out = "step,nce,dir,norm,total\n";
  for (const StageAReport& r : curve) {
    out += fmt::format("{},{},{},{},{}\n", r.step, r.nce, r.dir, r.norm, r.total);
  }
  return out;
}

Projector LoadStageAProjector(const std::filesystem::path& path) {
  return Projector::FromBundle(ReadBundle(path, "stage_a"));
}

}  // namespace slotbridge
