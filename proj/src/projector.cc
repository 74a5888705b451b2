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

#include "slotbridge/projector.h"

#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

namespace slotbridge {
namespace {

Matrix RandomNormal(Rng& rng, Eigen::Index rows, Eigen::Index cols, double std) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = std * rng.Normal();
  return m;
}

// Shared forward for the trainable and read-only paths; `bind` turns a
// parameter into a graph node.
template <typename Bind>
Var ProjectorForward(Var z, const ProjectorConfig& c, bool training,
                     Rng* rng, Bind&& bind, Parameter& w1, Parameter& b1,
                     Parameter& w2, Parameter& b2, Parameter& gain,
                     Parameter& bias) {
  if (z.cols() != c.input_dim) {
    throw std::invalid_argument(fmt::format(
        "projector input has dim {}, expected {}", z.cols(), c.input_dim));
  }
  Var h = ops::Gelu(ops::AddRow(ops::MatMul(z, bind(w1)), bind(b1)));
  if (training && c.dropout > 0.0) {
    if (rng == nullptr) throw std::invalid_argument("dropout needs an Rng");
    const double keep = 1.0 - c.dropout;
    Matrix mask(h.rows(), h.cols());
    for (Eigen::Index i = 0; i < mask.size(); ++i) {
      mask.data()[i] = rng->Uniform() < keep ? 1.0 / keep : 0.0;
    }
    h = ops::MaskMul(h, mask);
  }
  Var y = ops::AddRow(ops::MatMul(h, bind(w2)), bind(b2));
  Var gv = bind(gain);
  Var bv = bind(bias);
  return ops::LayerNormRows(y, &gv, &bv, c.layer_norm_eps);
}

}  // namespace

Projector::Projector(const ProjectorConfig& config, Rng& rng) : config_(config) {
  if (config.input_dim <= 0 || config.hidden_dim <= 0 || config.output_dim <= 0) {
    throw std::invalid_argument("projector dims must be positive");
  }
  if (config.dropout < 0.0 || config.dropout >= 1.0) {
    throw std::invalid_argument("dropout must be in [0, 1)");
  }
  w1_ = Parameter("projector.w1",
                  RandomNormal(rng, config.input_dim, config.hidden_dim,
                               1.0 / std::sqrt(double(config.input_dim))));
  b1_ = Parameter("projector.b1", Matrix::Zero(1, config.hidden_dim));
  w2_ = Parameter("projector.w2",
                  RandomNormal(rng, config.hidden_dim, config.output_dim,
                               1.0 / std::sqrt(double(config.hidden_dim))));
  b2_ = Parameter("projector.b2", Matrix::Zero(1, config.output_dim));
  ln_gain_ = Parameter("projector.ln_gain", Matrix::Ones(1, config.output_dim));
  ln_bias_ = Parameter("projector.ln_bias", Matrix::Zero(1, config.output_dim));
}

Var Projector::Bind(Graph& g, Parameter& p) const {
  return frozen_ ? g.ConstantRef(p.value) : g.Leaf(p);
}

Var Projector::Forward(Graph& g, Var z, bool training, Rng* dropout_rng) {
  return ProjectorForward(
      z, config_, training, dropout_rng,
      [&](Parameter& p) { return Bind(g, p); }, w1_, b1_, w2_, b2_, ln_gain_,
      ln_bias_);
}

Matrix Projector::ProjectBatch(const Matrix& z) const {
  Graph g;
  auto& self = const_cast<Projector&>(*this);
  return ProjectorForward(
             g.ConstantRef(z), config_, false, nullptr,
             [&](Parameter& p) { return g.ConstantRef(p.value); }, self.w1_,
             self.b1_, self.w2_, self.b2_, self.ln_gain_, self.ln_bias_)
      .value();
}

RowVector Projector::Project(const RowVector& z) const {
  Matrix m = z;
  return ProjectBatch(m).row(0);
}

std::vector<Parameter*> Projector::Parameters() {
  return {&w1_, &b1_, &w2_, &b2_, &ln_gain_, &ln_bias_};
}

std::vector<const Parameter*> Projector::Parameters() const {
  return {&w1_, &b1_, &w2_, &b2_, &ln_gain_, &ln_bias_};
}

std::string Projector::Digest() const {
  TensorHasher h;
  for (const Parameter* p : Parameters()) h.Add(p->name, p->value);
  return h.Finish();
}

void Projector::AppendTo(TensorBundle& bundle) const {
  bundle.meta["projector"] = {{"input_dim", config_.input_dim},
                              {"hidden_dim", config_.hidden_dim},
                              {"output_dim", config_.output_dim},
                              {"dropout", config_.dropout},
                              {"layer_norm_eps", config_.layer_norm_eps}};
  for (const Parameter* p : Parameters()) bundle.Add(p->name, p->value);
}

Projector Projector::FromBundle(const TensorBundle& bundle) {
  const auto& m = bundle.meta.at("projector");
  Projector p;
  p.config_.input_dim = m.at("input_dim").get<int>();
  p.config_.hidden_dim = m.at("hidden_dim").get<int>();
  p.config_.output_dim = m.at("output_dim").get<int>();
  p.config_.dropout = m.at("dropout").get<double>();
  p.config_.layer_norm_eps = m.at("layer_norm_eps").get<double>();
  for (Parameter* param : p.Parameters()) {
    const std::string name = param == &p.w1_   ? "projector.w1"
                             : param == &p.b1_ ? "projector.b1"
                             : param == &p.w2_ ? "projector.w2"
                             : param == &p.b2_ ? "projector.b2"
                             : param == &p.ln_gain_ ? "projector.ln_gain"
                                                    : "projector.ln_bias";
    *param = Parameter(name, bundle.Get(name));
  }
  return p;
}

VectorAdapter::VectorAdapter(int dim, int bottleneck, Rng& rng) {
  if (dim <= 0 || bottleneck <= 0) {
    throw std::invalid_argument("adapter dims must be positive");
  }
  down_ = Parameter("adapter.down",
                    RandomNormal(rng, dim, bottleneck, 1.0 / std::sqrt(double(dim))));
  down_bias_ = Parameter("adapter.down_bias", Matrix::Zero(1, bottleneck));
  up_ = Parameter("adapter.up", Matrix::Zero(bottleneck, dim));
  up_bias_ = Parameter("adapter.up_bias", Matrix::Zero(1, dim));
}

Var VectorAdapter::Forward(Graph& g, Var x) {
  Var h = ops::Gelu(ops::AddRow(ops::MatMul(x, g.Leaf(down_)), g.Leaf(down_bias_)));
  Var delta = ops::AddRow(ops::MatMul(h, g.Leaf(up_)), g.Leaf(up_bias_));
  return ops::Add(x, delta);
}

std::vector<Parameter*> VectorAdapter::Parameters() {
  return {&down_, &down_bias_, &up_, &up_bias_};
}

std::vector<const Parameter*> VectorAdapter::Parameters() const {
  return {&down_, &down_bias_, &up_, &up_bias_};
}

SlotExpander::SlotExpander(int dim, int num_slots, double initial_scale, Rng& rng) {
  if (dim <= 0) throw std::invalid_argument("expander dim must be positive");
  if (num_slots < 1) throw std::invalid_argument("K must be >= 1");
  for (int k = 0; k < num_slots; ++k) {
    maps_.emplace_back(fmt::format("expander.map{}", k),
                       RandomNormal(rng, dim, dim, 1.0 / std::sqrt(double(dim))));
    biases_.emplace_back(fmt::format("expander.bias{}", k), Matrix::Zero(1, dim));
  }
  scale_ = Parameter("expander.scale", Matrix::Constant(1, 1, initial_scale));
}

Var SlotExpander::Forward(Graph& g, Var unit) {
  std::vector<Var> rows;
  rows.reserve(maps_.size());
  for (size_t k = 0; k < maps_.size(); ++k) {
    rows.push_back(
        ops::AddRow(ops::MatMul(unit, g.Leaf(maps_[k])), g.Leaf(biases_[k])));
  }
  Var normed = ops::LayerNormRows(ops::ConcatRows(rows), nullptr, nullptr,
                                  kLayerNormEps);
  return ops::ScaleBy(normed, g.Leaf(scale_));
}

std::vector<Parameter*> SlotExpander::Parameters() {
  std::vector<Parameter*> out;
  for (size_t k = 0; k < maps_.size(); ++k) {
    out.push_back(&maps_[k]);
    out.push_back(&biases_[k]);
  }
  out.push_back(&scale_);
  return out;
}

std::vector<const Parameter*> SlotExpander::Parameters() const {
  std::vector<const Parameter*> out;
  for (size_t k = 0; k < maps_.size(); ++k) {
    out.push_back(&maps_[k]);
    out.push_back(&biases_[k]);
  }
  out.push_back(&scale_);
  return out;
}

Var ExpandSlots(Graph& g, SlotExpander& expander, VectorAdapter& adapter, Var p) {
  if (p.rows() != 1 || p.cols() != expander.dim()) {
    throw std::invalid_argument("ExpandSlots: expected a 1 x dim vector");
  }
  if (!(p.value().norm() > 0.0)) {
    throw std::domain_error("degenerate foreign vector");
  }
  return expander.Forward(g, adapter.Forward(g, ops::NormalizeRows(p)));
}

Matrix ExpandSlotsValue(SlotExpander& expander, VectorAdapter& adapter,
                        const RowVector& p) {
  Graph g;
  Matrix pm = p;
  return ExpandSlots(g, expander, adapter, g.Constant(std::move(pm))).value();
}

std::vector<int> FindSlotPositions(std::span<const int> prompt_ids,
                                   std::span<const int> slot_ids) {
  std::vector<int> positions(slot_ids.size(), -1);
  for (size_t i = 0; i < prompt_ids.size(); ++i) {
    for (size_t k = 0; k < slot_ids.size(); ++k) {
      if (prompt_ids[i] != slot_ids[k]) continue;
      if (positions[k] >= 0) {
        throw std::invalid_argument(
            fmt::format("slot token {} occurs more than once", k));
      }
      positions[k] = static_cast<int>(i);
    }
  }
  for (size_t k = 0; k < slot_ids.size(); ++k) {
    if (positions[k] < 0) {
      throw std::invalid_argument(fmt::format(
          "prompt has {} of {} slot tokens", k, slot_ids.size()));
    }
    if (k > 0 && positions[k] < positions[k - 1]) {
      throw std::invalid_argument("slot tokens out of order");
    }
  }
  return positions;
}

Matrix InjectSlots(const FrozenDecoder& decoder, std::span<const int> prompt_ids,
                   std::span<const int> slot_ids, const Matrix& slot_rows) {
  const std::vector<int> pos = FindSlotPositions(prompt_ids, slot_ids);
  if (slot_rows.rows() != static_cast<Eigen::Index>(pos.size()) ||
      slot_rows.cols() != decoder.hidden_dim()) {
    throw std::invalid_argument("InjectSlots: slot_rows shape");
  }
  Matrix rows = decoder.EmbedTokens(prompt_ids);
  for (size_t k = 0; k < pos.size(); ++k) {
    rows.row(pos[k]) = slot_rows.row(static_cast<Eigen::Index>(k));
  }
  return rows;
}

Var InjectSlots(Graph& g, const FrozenDecoder& decoder,
                std::span<const int> prompt_ids, std::span<const int> slot_ids,
                Var slot_rows) {
  const std::vector<int> pos = FindSlotPositions(prompt_ids, slot_ids);
  return ops::ScatterRows(g.Constant(decoder.EmbedTokens(prompt_ids)), pos,
                          slot_rows);
}

}  // namespace slotbridge
