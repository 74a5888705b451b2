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

#include "slotbridge/optimizer.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace slotbridge {

AdamW::AdamW(const AdamWConfig& config, std::vector<Parameter*> params)
    : config_(config), params_(std::move(params)) {
  if (!(config.learning_rate > 0.0)) {
    throw std::invalid_argument("learning_rate must be positive");
  }
  if (config.warmup_fraction < 0.0 || config.warmup_fraction > 1.0) {
    throw std::invalid_argument("warmup_fraction must be in [0, 1]");
  }
  for (const Parameter* p : params_) {
    m_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    v_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
  }
}

double AdamW::LearningRate(int step) const {
  const int warmup = static_cast<int>(
      std::lround(config_.warmup_fraction * std::max(config_.total_steps, 1)));
  if (warmup <= 0 || step >= warmup) return config_.learning_rate;
  return config_.learning_rate * static_cast<double>(step + 1) / warmup;
}

void AdamW::Step() {
  const double lr = LearningRate(step_);
  ++step_;
  const double bc1 = 1.0 - std::pow(config_.beta1, step_);
  const double bc2 = 1.0 - std::pow(config_.beta2, step_);
  for (size_t i = 0; i < params_.size(); ++i) {
    Parameter& p = *params_[i];
    m_[i] = config_.beta1 * m_[i] + (1.0 - config_.beta1) * p.grad;
    v_[i] = config_.beta2 * v_[i] +
            (1.0 - config_.beta2) * p.grad.cwiseProduct(p.grad);
    if (p.value.rows() > 1 && p.value.cols() > 1 && config_.weight_decay > 0.0) {
      p.value *= 1.0 - lr * config_.weight_decay;
    }
    p.value.array() -= lr * (m_[i].array() / bc1) /
                       ((v_[i].array() / bc2).sqrt() + config_.eps);
    p.ZeroGrad();
  }
}

void AdamW::ZeroGrad() {
  for (Parameter* p : params_) p->ZeroGrad();
}

void AdamW::AppendTo(TensorBundle& bundle, const std::string& prefix) const {
  bundle.meta[prefix + "step"] = step_;
  for (size_t i = 0; i < params_.size(); ++i) {
    bundle.Add(prefix + params_[i]->name + ".m", m_[i]);
    bundle.Add(prefix + params_[i]->name + ".v", v_[i]);
  }
}

void AdamW::RestoreFrom(const TensorBundle& bundle, const std::string& prefix) {
  step_ = bundle.meta.at(prefix + "step").get<int>();
  for (size_t i = 0; i < params_.size(); ++i) {
    const Matrix& m = bundle.Get(prefix + params_[i]->name + ".m");
    const Matrix& v = bundle.Get(prefix + params_[i]->name + ".v");
    if (m.rows() != m_[i].rows() || m.cols() != m_[i].cols() ||
        v.rows() != v_[i].rows() || v.cols() != v_[i].cols()) {
      throw std::invalid_argument("optimizer state shape mismatch for " +
                                  params_[i]->name);
    }
    m_[i] = m;
    v_[i] = v;
  }
}

}  // namespace slotbridge
