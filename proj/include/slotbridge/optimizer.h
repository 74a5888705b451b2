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

#ifndef SLOTBRIDGE_OPTIMIZER_H_
#define SLOTBRIDGE_OPTIMIZER_H_

#include <string>
#include <vector>

#include "slotbridge/autograd.h"
#include "slotbridge/checkpoint.h"

namespace slotbridge {

struct AdamWConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
  // Linear warmup over this fraction of total_steps, then constant.
  double warmup_fraction = 0.05;
  int total_steps = 1;
};

// Adam with decoupled weight decay. Decay applies only to parameters with
// more than one row and more than one column, so biases, norm gains and
// scalars are never pulled toward zero.
class AdamW {
 public:
  AdamW(const AdamWConfig& config, std::vector<Parameter*> params);

  // Learning rate used by the update with 0-based index step.
  double LearningRate(int step) const;
  // Applies one update from the accumulated grads, then zeroes them.
  void Step();
  void ZeroGrad();
  int step() const { return step_; }

  void AppendTo(TensorBundle& bundle, const std::string& prefix) const;
  void RestoreFrom(const TensorBundle& bundle, const std::string& prefix);

 private:
  AdamWConfig config_;
  std::vector<Parameter*> params_;
  std::vector<Matrix> m_, v_;
  int step_ = 0;
};

}  // namespace slotbridge

#endif  // SLOTBRIDGE_OPTIMIZER_H_
