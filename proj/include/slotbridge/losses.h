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

// Training objectives for both stages and the hard-negative queue.

#ifndef SLOTBRIDGE_LOSSES_H_
#define SLOTBRIDGE_LOSSES_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "slotbridge/autograd.h"

namespace slotbridge {

struct LossWeights {
  double lambda_dir = 0.05;
  double lambda_norm = 0.02;
  double lambda_contrast = 0.05;
  double lambda_nce_aux = 0.01;
  // Unit-vector matching auxiliary of the second stage.
  double lambda_cos_aux = 0.05;
  double temperature = 0.07;

  // Throws std::invalid_argument for a negative weight or temperature <= 0.
  void Validate() const;
  nlohmann::json ToJson() const;
  static LossWeights FromJson(const nlohmann::json& j);
};

// 0.5 * [NCE(p->h) + NCE(h->p)], rows cosine-normalized first. Row i of P
// and H form the positive pair. hard_negs (m x dim, may have zero rows) are
// appended to the denominator of the p->h direction only. Throws
// std::invalid_argument("no negatives") for a single pair without hard
// negatives.
Var InfoNceSymmetric(Graph& g, Var p, Var h, const Matrix& hard_negs,
                     double temperature);
double InfoNceSymmetricValue(const Matrix& p, const Matrix& h,
                             const Matrix& hard_negs, double temperature);

// Mean over rows of |p/|p| - h/|h||^2 = 2 - 2 cos. Zero rows throw
// std::domain_error.
Var DirectionLoss(Graph& g, Var p, Var h);
double DirectionLossValue(const Matrix& p, const Matrix& h);

// Mean over rows of (ln|p| - ln|h|)^2. Zero rows throw std::domain_error.
Var LogNormLoss(Graph& g, Var p, Var h);
double LogNormLossValue(const Matrix& p, const Matrix& h);

// weight * max(0, sft - zero). zero is a plain number, so no gradient ever
// reaches the zeroed-injection pass.
Var UsageContrast(Var sft, double zero, double weight);
double UsageContrastValue(double sft, double zero, double weight);

struct AuxTerms {
  Var cos_term;  // mean over rows of 1 - cos(mean_slot_i, teacher_i)
  Var nce_term;  // InfoNCE of mean slots against in-batch teachers
  Var total;     // lambda_cos_aux * cos_term + lambda_nce_aux * nce_term
};

// mean_slots and teachers are batch x dim. A batch of one has a single
// candidate, so its nce_term is 0. Zero teacher rows throw std::domain_error.
AuxTerms SlotAlignmentAux(Graph& g, Var mean_slots, Var teachers,
                          const LossWeights& weights);

// Fixed-capacity FIFO of unit-normalized vectors stored at half precision.
// Entries are kept as the exact double value of their binary16 encoding, so
// every read sees the rounded vector.
class NegativeQueue {
 public:
  static constexpr size_t kDefaultCapacity = 32768;

  explicit NegativeQueue(int dim, size_t capacity = kDefaultCapacity);

  // Normalizes each row, rounds it to half precision and appends it,
  // evicting the oldest entries beyond capacity. Zero rows throw
  // std::domain_error.
  void Push(const Matrix& batch);

  // The min(top_k, size()) stored vectors with the highest score, where an
  // entry's score is its maximum cosine to any batch row. Higher scores come
  // first; ties go to the older entry. With guard set, entries whose score
  // exceeds it are skipped. An empty queue yields a 0 x dim matrix.
  Matrix Mine(const Matrix& batch, size_t top_k,
              std::optional<double> guard = std::nullopt) const;

  size_t size() const { return size_; }
  size_t capacity() const { return capacity_; }
  int dim() const { return dim_; }
  // Stored entries, oldest first.
  Matrix Contents() const;
  RowVector Entry(size_t i) const;

  // Replaces the contents. Rows are taken as stored values and must already
  // be exactly representable at half precision.
  void Restore(const Matrix& contents);

 private:
  size_t Slot(size_t i) const { return (head_ + i) % capacity_; }

  int dim_;
  size_t capacity_;
  size_t head_ = 0;
  size_t size_ = 0;
  Matrix data_;             // grows to capacity_ rows
  std::vector<double> norms_;
};

}  // namespace slotbridge

#endif  // SLOTBRIDGE_LOSSES_H_
