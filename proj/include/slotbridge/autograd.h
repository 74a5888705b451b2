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

// Minimal reverse-mode automatic differentiation over dense row-major
// matrices. A Graph is a tape: every op appends a node, Backward() walks the
// tape in reverse. Nodes that do not (transitively) depend on a trainable
// Parameter carry no backward closure, so frozen forward passes cost only the
// forward arithmetic.

#ifndef SLOTBRIDGE_AUTOGRAD_H_
#define SLOTBRIDGE_AUTOGRAD_H_

#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace slotbridge {

using Matrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic, Eigen::RowMajor>;

// A trainable tensor. grad accumulates across Backward() calls until
// ZeroGrad().
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;

  Parameter() = default;
  Parameter(std::string n, Matrix v)
      : name(std::move(n)), value(std::move(v)),
        grad(Matrix::Zero(value.rows(), value.cols())) {}

  void ZeroGrad() { grad.setZero(value.rows(), value.cols()); }
};

class Graph;

// Handle to a node on a Graph. Cheap to copy; valid while the Graph lives.
class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  const Matrix& grad() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  // Value of a 1x1 node.
  double scalar() const;
  bool requires_grad() const;

  Graph* graph() const { return graph_; }
  int id() const { return id_; }

 private:
  friend class Graph;
  Var(Graph* g, int id) : graph_(g), id_(id) {}

  Graph* graph_ = nullptr;
  int id_ = -1;
};

class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, int)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // Owned constant.
  Var Constant(Matrix value);
  // Constant that aliases external storage; the referent must outlive the
  // graph and stay unmodified while the graph is in use.
  Var ConstantRef(const Matrix& value);
  // Leaf bound to a parameter. On Backward() the node gradient is added into
  // param.grad.
  Var Leaf(Parameter& param);

  // Reverse sweep from a 1x1 node.
  void Backward(Var root);

  // Internal API used by op implementations.
  Var AddNode(Matrix value, std::vector<int> inputs, BackwardFn backward);
  const Matrix& value(int id) const;
  Matrix& grad(int id);
  bool requires_grad(int id) const { return nodes_[id].requires_grad; }
  // Adds delta into the gradient of an input if that input needs one.
  void Accumulate(int id, const Matrix& delta);
  template <typename Expr>
  void AccumulateExpr(int id, const Expr& delta) {
    if (!nodes_[id].requires_grad) return;
    EnsureGrad(id);
    nodes_[id].grad += delta;
  }
  size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix owned;
    const Matrix* ref = nullptr;
    Matrix grad;
    bool requires_grad = false;
    Parameter* param = nullptr;
    BackwardFn backward;
  };

  void EnsureGrad(int id);

  std::vector<Node> nodes_;
};

namespace ops {

Var MatMul(Var a, Var b);
// a * b^T
Var MatMulBT(Var a, Var b);
Var Transpose(Var a);
Var Add(Var a, Var b);
Var Sub(Var a, Var b);
// Adds a 1xN row to every row of a.
Var AddRow(Var a, Var row);
Var Scale(Var a, double factor);
// Multiplies every entry of a by the 1x1 node s.
Var ScaleBy(Var a, Var s);
Var Hadamard(Var a, Var b);
Var AddScalar(Var a, double c);
Var Gelu(Var a);
Var Exp(Var a);
Var Log(Var a);
Var Square(Var a);
// max(0, a) elementwise.
Var Relu(Var a);
Var Sum(Var a);
Var Mean(Var a);
// Column vector of per-row sums.
Var RowSum(Var a);
// 1xN mean over rows.
Var MeanRows(Var a);
// Column vector of per-row L2 norms.
Var RowNorm(Var a);
// Each row divided by its L2 norm. Rows must be nonzero.
Var NormalizeRows(Var a);
// Per-row RMS normalization, x / sqrt(mean(x^2) + eps), times an optional
// 1xN gain.
Var RmsNormRows(Var a, const Var* gain, double eps);
// Per-row LayerNorm (population variance). gain/bias optional.
Var LayerNormRows(Var a, const Var* gain, const Var* bias, double eps);
// Row softmax after adding a constant additive mask (use -inf entries to
// exclude).
Var SoftmaxRows(Var a, const Matrix* additive_mask);
// Mean cross-entropy of row-wise softmax(logits) against integer targets.
// Targets < 0 are ignored. At least one target must be valid.
Var CrossEntropy(Var logits, std::span<const int> targets);
Var SliceCols(Var a, Eigen::Index start, Eigen::Index count);
Var SliceRows(Var a, Eigen::Index start, Eigen::Index count);
Var ConcatRows(std::span<const Var> parts);
Var ConcatCols(std::span<const Var> parts);
// Replaces rows of base at the given positions with the rows of values.
Var ScatterRows(Var base, std::span<const int> positions, Var values);
// Elementwise product with a fixed mask, e.g. inverted dropout.
Var MaskMul(Var a, const Matrix& mask);
// Rotary position embedding on every head of a (seq x heads*head_dim).
Var Rope(Var a, int num_heads, double base);
// Value copy with no gradient path.
Var Detach(Var a);

}  // namespace ops

// Elementwise GELU (erf form) and its derivative, shared with value-only code.
double GeluValue(double x);
double GeluGrad(double x);

}  // namespace slotbridge

#endif  // SLOTBRIDGE_AUTOGRAD_H_
