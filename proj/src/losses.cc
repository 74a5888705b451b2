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

#include "slotbridge/losses.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <fmt/format.h>

#include "slotbridge/half.h"

namespace slotbridge {
namespace {

std::vector<int> Diagonal(Eigen::Index n) {
  std::vector<int> t(static_cast<size_t>(n));
  std::iota(t.begin(), t.end(), 0);
  return t;
}

void RequireNonzeroRows(const Matrix& m, const char* what) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    if (!(m.row(i).norm() > 0.0)) {
      throw std::domain_error(fmt::format("{}: zero vector in row {}", what, i));
    }
  }
}

void RequireSameShape(Var a, Var b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(fmt::format("{}: shape mismatch", what));
  }
}

}  // namespace

void LossWeights::Validate() const {
  const std::pair<const char*, double> fields[] = {
      {"lambda_dir", lambda_dir},         {"lambda_norm", lambda_norm},
      {"lambda_contrast", lambda_contrast}, {"lambda_nce_aux", lambda_nce_aux},
      {"lambda_cos_aux", lambda_cos_aux}};
  for (const auto& [name, v] : fields) {
    if (!(v >= 0.0)) {
      throw std::invalid_argument(fmt::format("{} must be >= 0", name));
    }
  }
  if (!(temperature > 0.0)) {
    throw std::invalid_argument("temperature must be positive");
  }
}

nlohmann::json LossWeights::ToJson() const {
  return {{"lambda_dir", lambda_dir},           {"lambda_norm", lambda_norm},
          {"lambda_contrast", lambda_contrast}, {"lambda_nce_aux", lambda_nce_aux},
          {"lambda_cos_aux", lambda_cos_aux},   {"temperature", temperature}};
}

LossWeights LossWeights::FromJson(const nlohmann::json& j) {
  LossWeights w;
  w.lambda_dir = j.value("lambda_dir", w.lambda_dir);
  w.lambda_norm = j.value("lambda_norm", w.lambda_norm);
  w.lambda_contrast = j.value("lambda_contrast", w.lambda_contrast);
  w.lambda_nce_aux = j.value("lambda_nce_aux", w.lambda_nce_aux);
  w.lambda_cos_aux = j.value("lambda_cos_aux", w.lambda_cos_aux);
  w.temperature = j.value("temperature", w.temperature);
  w.Validate();
  return w;
}

Var InfoNceSymmetric(Graph& g, Var p, Var h, const Matrix& hard_negs,
                     double temperature) {
  RequireSameShape(p, h, "InfoNceSymmetric");
  if (!(temperature > 0.0)) throw std::invalid_argument("temperature must be positive");
  const Eigen::Index n = p.rows();
  if (n == 0) throw std::invalid_argument("InfoNceSymmetric: empty batch");
  if (n == 1 && hard_negs.rows() == 0) throw std::invalid_argument("no negatives");
  if (hard_negs.rows() > 0 && hard_negs.cols() != p.cols()) {
    throw std::invalid_argument("InfoNceSymmetric: hard negative dim");
  }
  const double inv_t = 1.0 / temperature;
  Var pn = ops::NormalizeRows(p);
  Var hn = ops::NormalizeRows(h);
  Var sim = ops::Scale(ops::MatMulBT(pn, hn), inv_t);
  const std::vector<int> diag = Diagonal(n);

  Var forward_logits = sim;
  if (hard_negs.rows() > 0) {
    RequireNonzeroRows(hard_negs, "hard negatives");
    Matrix negs = hard_negs.rowwise().normalized();
    Var hard = ops::Scale(ops::MatMulBT(pn, g.Constant(std::move(negs))), inv_t);
    const Var parts[] = {sim, hard};
    forward_logits = ops::ConcatCols(parts);
  }
  Var p_to_h = ops::CrossEntropy(forward_logits, diag);
  Var h_to_p = ops::CrossEntropy(ops::Transpose(sim), diag);
  return ops::Scale(ops::Add(p_to_h, h_to_p), 0.5);
}

double InfoNceSymmetricValue(const Matrix& p, const Matrix& h,
                             const Matrix& hard_negs, double temperature) {
  Graph g;
  return InfoNceSymmetric(g, g.ConstantRef(p), g.ConstantRef(h), hard_negs,
                          temperature)
      .scalar();
}

Var DirectionLoss(Graph& g, Var p, Var h) {
  (void)g;
  RequireSameShape(p, h, "DirectionLoss");
  Var diff = ops::Sub(ops::NormalizeRows(p), ops::NormalizeRows(h));
  return ops::Mean(ops::RowSum(ops::Square(diff)));
}

double DirectionLossValue(const Matrix& p, const Matrix& h) {
  Graph g;
  return DirectionLoss(g, g.ConstantRef(p), g.ConstantRef(h)).scalar();
}

Var LogNormLoss(Graph& g, Var p, Var h) {
  (void)g;
  RequireSameShape(p, h, "LogNormLoss");
  RequireNonzeroRows(p.value(), "LogNormLoss");
  RequireNonzeroRows(h.value(), "LogNormLoss");
  Var d = ops::Sub(ops::Log(ops::RowNorm(p)), ops::Log(ops::RowNorm(h)));
  return ops::Mean(ops::Square(d));
}

double LogNormLossValue(const Matrix& p, const Matrix& h) {
  Graph g;
  return LogNormLoss(g, g.ConstantRef(p), g.ConstantRef(h)).scalar();
}

Var UsageContrast(Var sft, double zero, double weight) {
  return ops::Scale(ops::Relu(ops::AddScalar(sft, -zero)), weight);
}

double UsageContrastValue(double sft, double zero, double weight) {
  return weight * std::max(0.0, sft - zero);
}

AuxTerms SlotAlignmentAux(Graph& g, Var mean_slots, Var teachers,
                          const LossWeights& weights) {
  (void)g;
  RequireSameShape(mean_slots, teachers, "SlotAlignmentAux");
  RequireNonzeroRows(teachers.value(), "SlotAlignmentAux teacher");
  Var mn = ops::NormalizeRows(mean_slots);
  Var tn = ops::NormalizeRows(teachers);
  Var cos = ops::RowSum(ops::Hadamard(mn, tn));
  AuxTerms out;
  out.cos_term = ops::Mean(ops::AddScalar(ops::Scale(cos, -1.0), 1.0));
  Var logits = ops::Scale(ops::MatMulBT(mn, tn), 1.0 / weights.temperature);
  out.nce_term = ops::CrossEntropy(logits, Diagonal(mean_slots.rows()));
  out.total = ops::Add(ops::Scale(out.cos_term, weights.lambda_cos_aux),
                       ops::Scale(out.nce_term, weights.lambda_nce_aux));
  return out;
}

NegativeQueue::NegativeQueue(int dim, size_t capacity)
    : dim_(dim), capacity_(capacity) {
  if (dim <= 0) throw std::invalid_argument("queue dim must be positive");
  if (capacity == 0) throw std::invalid_argument("queue capacity must be positive");
  data_.resize(0, dim);
}

void NegativeQueue::Push(const Matrix& batch) {
  if (batch.cols() != dim_) throw std::invalid_argument("queue push: dim mismatch");
  RequireNonzeroRows(batch, "queue push");
  for (Eigen::Index r = 0; r < batch.rows(); ++r) {
    RowVector v = batch.row(r) / batch.row(r).norm();
    for (Eigen::Index c = 0; c < v.cols(); ++c) v(c) = HalfToDouble(DoubleToHalf(v(c)));
    size_t slot;
    if (size_ < capacity_) {
      slot = Slot(size_);
      if (static_cast<size_t>(data_.rows()) <= slot) {
        // Grow geometrically; the ring has not wrapped yet so head_ == 0.
        const size_t rows = std::min(capacity_, std::max<size_t>(slot + 1, 2 * data_.rows()));
        data_.conservativeResize(static_cast<Eigen::Index>(rows), dim_);
        norms_.resize(rows);
      }
      ++size_;
    } else {
      slot = head_;
      head_ = (head_ + 1) % capacity_;
    }
    data_.row(static_cast<Eigen::Index>(slot)) = v;
    norms_[slot] = v.norm();
  }
}

Matrix NegativeQueue::Mine(const Matrix& batch, size_t top_k,
                           std::optional<double> guard) const {
  if (size_ == 0 || top_k == 0) return Matrix(0, dim_);
  if (batch.cols() != dim_) throw std::invalid_argument("queue mine: dim mismatch");
  RequireNonzeroRows(batch, "queue mine");
  const Matrix unit = batch.rowwise().normalized();
  const Matrix dots = data_.topRows(static_cast<Eigen::Index>(
                          std::min<size_t>(data_.rows(), capacity_))) *
                      unit.transpose();
  std::vector<double> score(size_);
  std::vector<size_t> order;
  order.reserve(size_);
  for (size_t i = 0; i < size_; ++i) {
    const size_t s = Slot(i);
    score[i] = dots.row(static_cast<Eigen::Index>(s)).maxCoeff() / norms_[s];
    if (guard && score[i] > *guard) continue;
    order.push_back(i);
  }
  const size_t k = std::min(top_k, order.size());
  std::partial_sort(order.begin(), order.begin() + k, order.end(),
                    [&](size_t a, size_t b) {
                      if (score[a] != score[b]) return score[a] > score[b];
                      return a < b;
                    });
  Matrix out(static_cast<Eigen::Index>(k), dim_);
  for (size_t r = 0; r < k; ++r) {
    out.row(static_cast<Eigen::Index>(r)) =
        data_.row(static_cast<Eigen::Index>(Slot(order[r])));
  }
  return out;
}

Matrix NegativeQueue::Contents() const {
  Matrix out(static_cast<Eigen::Index>(size_), dim_);
  for (size_t i = 0; i < size_; ++i) {
    out.row(static_cast<Eigen::Index>(i)) = data_.row(static_cast<Eigen::Index>(Slot(i)));
  }
  return out;
}

RowVector NegativeQueue::Entry(size_t i) const {
  if (i >= size_) throw std::out_of_range("queue entry");
  return data_.row(static_cast<Eigen::Index>(Slot(i)));
}

void NegativeQueue::Restore(const Matrix& contents) {
  if (contents.cols() != dim_ && contents.rows() > 0) {
    throw std::invalid_argument("queue restore: dim mismatch");
  }
  if (static_cast<size_t>(contents.rows()) > capacity_) {
    throw std::invalid_argument("queue restore: exceeds capacity");
  }
  for (Eigen::Index i = 0; i < contents.size(); ++i) {
    const double v = contents.data()[i];
    if (HalfToDouble(DoubleToHalf(v)) != v) {
      throw std::invalid_argument("queue restore: value is not a half");
    }
  }
  head_ = 0;
  size_ = static_cast<size_t>(contents.rows());
  data_ = contents;
  data_.conservativeResize(contents.rows(), dim_);
  norms_.assign(size_, 0.0);
  for (size_t i = 0; i < size_; ++i) norms_[i] = data_.row(static_cast<Eigen::Index>(i)).norm();
}

}  // namespace slotbridge
