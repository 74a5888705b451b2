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
#include "slotbridge/lora.h"

#include <algorithm>
#include <stdexcept>

#include <fmt/format.h>

namespace slotbridge {

std::string LoraTargetName(LoraTarget t) {
  switch (t) {
    case LoraTarget::kQuery: return "q";
    case LoraTarget::kKey: return "k";
    case LoraTarget::kValue: return "v";
    case LoraTarget::kOutput: return "o";
    case LoraTarget::kUp: return "up";
    case LoraTarget::kDown: return "down";
  }
  return "?";
}

LoraTarget ParseLoraTarget(const std::string& name) {
  for (LoraTarget t : AllLoraTargets()) {
    if (LoraTargetName(t) == name) return t;
  }
  throw std::invalid_argument("unknown LoRA target: " + name);
}

std::vector<LoraTarget> AllLoraTargets() {
  return {LoraTarget::kQuery, LoraTarget::kKey, LoraTarget::kValue,
          LoraTarget::kOutput, LoraTarget::kUp, LoraTarget::kDown};
}

LoraAdapterSet::LoraAdapterSet(const LoraConfig& config,
                               const DecoderShape& shape, Rng& rng)
    : config_(config) {
  if (config.rank <= 0) throw std::invalid_argument("LoRA rank must be > 0");
  if (config.alpha < 0) throw std::invalid_argument("LoRA alpha must be >= 0");
  std::vector<int> layers = config.layers;
  if (layers.empty()) {
    for (int l = 0; l < shape.layers; ++l) layers.push_back(l);
  }
  for (int l : layers) {
    if (l < 0 || l >= shape.layers) throw std::out_of_range("LoRA layer index");
    for (LoraTarget t : config.targets) {
      int in = shape.dim, out = shape.dim;
      if (t == LoraTarget::kUp) out = shape.mlp_dim;
      if (t == LoraTarget::kDown) in = shape.mlp_dim;
      Matrix a(config.rank, in);
      for (Eigen::Index i = 0; i < a.size(); ++i) {
        a.data()[i] = config.init_std * rng.Normal();
      }
      const std::string base = fmt::format("lora.{}.{}", l, LoraTargetName(t));
      adapters_.emplace(std::make_pair(l, t),
                        Pair{Parameter(base + ".A", std::move(a)),
                             Parameter(base + ".B", Matrix::Zero(out, config.rank))});
    }
  }
}

std::optional<Var> LoraAdapterSet::Delta(Graph& g, int layer, LoraTarget target,
                                         Var x) {
  auto it = adapters_.find({layer, target});
  if (it == adapters_.end()) return std::nullopt;
  Pair& p = it->second;
  Var a = trainable_ ? g.Leaf(p.a) : g.ConstantRef(p.a.value);
  Var b = trainable_ ? g.Leaf(p.b) : g.ConstantRef(p.b.value);
  return ops::Scale(ops::MatMulBT(ops::MatMulBT(x, a), b), scaling());
}

std::vector<Parameter*> LoraAdapterSet::Parameters() {
  std::vector<Parameter*> out;
  for (auto& [key, p] : adapters_) {
    out.push_back(&p.a);
    out.push_back(&p.b);
  }
  return out;
}

std::vector<const Parameter*> LoraAdapterSet::Parameters() const {
  std::vector<const Parameter*> out;
  for (const auto& [key, p] : adapters_) {
    out.push_back(&p.a);
    out.push_back(&p.b);
  }
  return out;
}

void LoraAdapterSet::ZeroB() {
  for (auto& [key, p] : adapters_) p.b.value.setZero();
}

}  // namespace slotbridge
