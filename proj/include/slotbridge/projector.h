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

// Trainable bridge parameters: the sentence-vector projector, the slot
// expander with its learned scale, and the residual vector adapter.

#ifndef SLOTBRIDGE_PROJECTOR_H_
#define SLOTBRIDGE_PROJECTOR_H_

#include <span>
#include <string>
#include <vector>

#include "slotbridge/autograd.h"
#include "slotbridge/checkpoint.h"
#include "slotbridge/models.h"
#include "slotbridge/rng.h"

namespace slotbridge {

struct ProjectorConfig {
  int input_dim = 768;
  int hidden_dim = 3072;
  int output_dim = 2048;
  double dropout = 0.10;
  double layer_norm_eps = 1e-5;
};

// input -> Linear -> GELU -> Dropout -> Linear -> LayerNorm (affine).
class Projector {
 public:
  Projector(const ProjectorConfig& config, Rng& rng);

  // z: batch x input_dim. With training set, dropout_rng must be non-null
  // and drives the inverted-dropout mask. Parameters enter as leaves unless
  // frozen().
  Var Forward(Graph& g, Var z, bool training, Rng* dropout_rng);
  // Evaluation-mode mapping of one vector / a batch of row vectors.
  RowVector Project(const RowVector& z) const;
  Matrix ProjectBatch(const Matrix& z) const;

  const ProjectorConfig& config() const { return config_; }
  std::vector<Parameter*> Parameters();
  std::vector<const Parameter*> Parameters() const;
  bool frozen() const { return frozen_; }
  void set_frozen(bool f) { frozen_ = f; }
  std::string Digest() const;

  void AppendTo(TensorBundle& bundle) const;
  static Projector FromBundle(const TensorBundle& bundle);

 private:
  Projector() = default;
  Var Bind(Graph& g, Parameter& p) const;

  ProjectorConfig config_;
  bool frozen_ = false;
  Parameter w1_, b1_, w2_, b2_, ln_gain_, ln_bias_;
};

// Two-layer residual bottleneck: x + GELU(x D + c) U + e. U and e start at
// zero, so a fresh adapter is the identity.
class VectorAdapter {
 public:
  VectorAdapter(int dim, int bottleneck, Rng& rng);

  Var Forward(Graph& g, Var x);
  std::vector<Parameter*> Parameters();
  std::vector<const Parameter*> Parameters() const;
  int dim() const { return static_cast<int>(down_.value.rows()); }
  int bottleneck() const { return static_cast<int>(down_.value.cols()); }

 private:
  Parameter down_, down_bias_, up_, up_bias_;
};

// K independent affine maps followed by non-affine LayerNorm and one shared
// learned scale. Every output row has L2 norm |scale| * sqrt(dim) up to the
// LayerNorm epsilon.
class SlotExpander {
 public:
  static constexpr double kLayerNormEps = 1e-12;

  SlotExpander(int dim, int num_slots, double initial_scale, Rng& rng);

  // unit: 1 x dim (already normalized and adapted). Returns K x dim.
  Var Forward(Graph& g, Var unit);
  int num_slots() const { return static_cast<int>(maps_.size()); }
  int dim() const {
    return maps_.empty() ? 0 : static_cast<int>(maps_[0].value.rows());
  }
  double scale() const { return scale_.value(0, 0); }
  void set_scale(double s) { scale_.value(0, 0) = s; }
  std::vector<Parameter*> Parameters();
  std::vector<const Parameter*> Parameters() const;
  Parameter& scale_parameter() { return scale_; }

 private:
  std::vector<Parameter> maps_;
  std::vector<Parameter> biases_;
  Parameter scale_;
};

// slot_k = scale * LayerNorm(map_k(adapter(p / |p|))). Throws
// std::domain_error("degenerate foreign vector") for a zero p.
Var ExpandSlots(Graph& g, SlotExpander& expander, VectorAdapter& adapter, Var p);
Matrix ExpandSlotsValue(SlotExpander& expander, VectorAdapter& adapter,
                        const RowVector& p);

// Positions of slot_ids in prompt_ids. Each slot token must occur exactly
// once and in order; anything else throws std::invalid_argument.
std::vector<int> FindSlotPositions(std::span<const int> prompt_ids,
                                   std::span<const int> slot_ids);

// Base embedding rows of prompt_ids with the slot positions overwritten by
// slot_rows; every other row is the untouched base row.
Matrix InjectSlots(const FrozenDecoder& decoder, std::span<const int> prompt_ids,
                   std::span<const int> slot_ids, const Matrix& slot_rows);
Var InjectSlots(Graph& g, const FrozenDecoder& decoder,
                std::span<const int> prompt_ids, std::span<const int> slot_ids,
                Var slot_rows);

}  // namespace slotbridge

#endif  // SLOTBRIDGE_PROJECTOR_H_
