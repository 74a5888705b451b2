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
#ifndef SLOTBRIDGE_LORA_H_
#define SLOTBRIDGE_LORA_H_

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "slotbridge/autograd.h"
#include "slotbridge/rng.h"

namespace slotbridge {

enum class LoraTarget { kQuery, kKey, kValue, kOutput, kUp, kDown };

std::string LoraTargetName(LoraTarget t);
LoraTarget ParseLoraTarget(const std::string& name);
std::vector<LoraTarget> AllLoraTargets();

struct LoraConfig {
  int rank = 16;
  double alpha = 16.0;
  std::vector<LoraTarget> targets = AllLoraTargets();
  // Layers to adapt; empty means every decoder layer.
  std::vector<int> layers;
  double init_std = 0.02;
};

// Shape of the projections the adapter set attaches to.
struct DecoderShape {
  int layers = 0;
  int dim = 0;
  int mlp_dim = 0;
};

// Low-rank deltas on frozen projection matrices. For an input x (rows are
// positions) the adapted projection is
//   y = x W + (alpha / rank) * x A^T B^T
// with A: rank x in and B: out x rank. B starts at zero so the adapted model
// reproduces the frozen one bit-exactly until B is trained.
class LoraAdapterSet {
 public:
  LoraAdapterSet(const LoraConfig& config, const DecoderShape& shape, Rng& rng);

  // Delta term for one projection, or nullopt if (layer, target) is not
  // adapted. When trainable() is false the factors enter the graph as
  // constants.
  std::optional<Var> Delta(Graph& g, int layer, LoraTarget target, Var x);

  double scaling() const { return config_.alpha / config_.rank; }
  const LoraConfig& config() const { return config_; }
  bool trainable() const { return trainable_; }
  void set_trainable(bool t) { trainable_ = t; }

  std::vector<Parameter*> Parameters();
  std::vector<const Parameter*> Parameters() const;
  void ZeroB();

 private:
  struct Pair {
    Parameter a;
    Parameter b;
  };
  LoraConfig config_;
  bool trainable_ = true;
  std::map<std::pair<int, LoraTarget>, Pair> adapters_;
};

}  // namespace slotbridge

#endif  // SLOTBRIDGE_LORA_H_
