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

#include "slotbridge/autograd.h"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace slotbridge {

const Matrix& Var::value() const { return graph_->value(id_); }
const Matrix& Var::grad() const { return graph_->grad(id_); }
bool Var::requires_grad() const { return graph_->requires_grad(id_); }

double Var::scalar() const {
  const Matrix& v = value();
  if (v.rows() != 1 || v.cols() != 1) {
    throw std::logic_error("scalar() on a non-1x1 node");
  }
  return v(0, 0);
}

Var Graph::Constant(Matrix value) {
  Node n;
  n.owned = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Graph::ConstantRef(const Matrix& value) {
  Node n;
  n.ref = &value;
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Graph::Leaf(Parameter& param) {
  Node n;
  n.ref = &param.value;
  n.param = &param;
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Graph::AddNode(Matrix value, std::vector<int> inputs, BackwardFn backward) {
  Node n;
  n.owned = std::move(value);
  for (int in : inputs) {
    if (nodes_[in].requires_grad) {
      n.requires_grad = true;
      break;
    }
  }
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

const Matrix& Graph::value(int id) const {
  const Node& n = nodes_[id];
  return n.ref != nullptr ? *n.ref : n.owned;
}

void Graph::EnsureGrad(int id) {
  Node& n = nodes_[id];
  if (n.grad.size() == 0) {
    const Matrix& v = value(id);
    n.grad = Matrix::Zero(v.rows(), v.cols());
  }
}

Matrix& Graph::grad(int id) {
  EnsureGrad(id);
  return nodes_[id].grad;
}

void Graph::Accumulate(int id, const Matrix& delta) {
  if (!nodes_[id].requires_grad) return;
  EnsureGrad(id);
  nodes_[id].grad += delta;
}

void Graph::Backward(Var root) {
  if (root.graph() != this) throw std::logic_error("root from another graph");
  const Matrix& rv = value(root.id());
  if (rv.rows() != 1 || rv.cols() != 1) {
    throw std::logic_error("Backward() requires a 1x1 root");
  }
  if (!nodes_[root.id()].requires_grad) return;
  grad(root.id())(0, 0) += 1.0;
  for (int id = root.id(); id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.requires_grad || n.grad.size() == 0) continue;
    if (n.backward) {
      n.backward(*this, id);
    } else if (n.param != nullptr) {
      n.param->grad += n.grad;
    }
  }
}

double GeluValue(double x) {
  return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2));
}

double GeluGrad(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
  const double pdf =
      std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

namespace ops {
namespace {

Graph& G(Var a) { return *a.graph(); }

void CheckSameShape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch");
  }
}

}  // namespace

Var MatMul(Var a, Var b) {
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  if (av.cols() != bv.rows()) throw std::invalid_argument("MatMul: shape");
  int ia = a.id(), ib = b.id();
  return G(a).AddNode(av * bv, {ia, ib}, [ia, ib](Graph& g, int self) {
    const Matrix& dy = g.grad(self);
    if (g.requires_grad(ia)) g.AccumulateExpr(ia, dy * g.value(ib).transpose());
    if (g.requires_grad(ib)) g.AccumulateExpr(ib, g.value(ia).transpose() * dy);
  });
}

Var MatMulBT(Var a, Var b) {
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  if (av.cols() != bv.cols()) throw std::invalid_argument("MatMulBT: shape");
  int ia = a.id(), ib = b.id();
  return G(a).AddNode(av * bv.transpose(), {ia, ib},
                      [ia, ib](Graph& g, int self) {
                        const Matrix& dy = g.grad(self);
                        if (g.requires_grad(ia)) {
                          g.AccumulateExpr(ia, dy * g.value(ib));
                        }
                        if (g.requires_grad(ib)) {
                          g.AccumulateExpr(ib, dy.transpose() * g.value(ia));
                        }
                      });
}

Var Transpose(Var a) {
  int ia = a.id();
  return G(a).AddNode(a.value().transpose(), {ia}, [ia](Graph& g, int self) {
    g.AccumulateExpr(ia, g.grad(self).transpose());
  });
}

Var Add(Var a, Var b) {
  CheckSameShape(a.value(), b.value(), "Add");
  int ia = a.id(), ib = b.id();
  return G(a).AddNode(a.value() + b.value(), {ia, ib},
                      [ia, ib](Graph& g, int self) {
                        g.Accumulate(ia, g.grad(self));
                        g.Accumulate(ib, g.grad(self));
                      });
}

Var Sub(Var a, Var b) {
  CheckSameShape(a.value(), b.value(), "Sub");
  int ia = a.id(), ib = b.id();
  return G(a).AddNode(a.value() - b.value(), {ia, ib},
                      [ia, ib](Graph& g, int self) {
                        g.Accumulate(ia, g.grad(self));
                        g.AccumulateExpr(ib, -g.grad(self));
                      });
}

Var AddRow(Var a, Var row) {
  const Matrix& av = a.value();
  const Matrix& rv = row.value();
  if (rv.rows() != 1 || rv.cols() != av.cols()) {
    throw std::invalid_argument("AddRow: shape");
  }
  Matrix out = av;
  out.rowwise() += rv.row(0);
  int ia = a.id(), ir = row.id();
  return G(a).AddNode(std::move(out), {ia, ir}, [ia, ir](Graph& g, int self) {
    g.Accumulate(ia, g.grad(self));
    if (g.requires_grad(ir)) g.AccumulateExpr(ir, g.grad(self).colwise().sum());
  });
}

Var Scale(Var a, double factor) {
  int ia = a.id();
  return G(a).AddNode(a.value() * factor, {ia},
                      [ia, factor](Graph& g, int self) {
                        g.AccumulateExpr(ia, g.grad(self) * factor);
                      });
}

Var ScaleBy(Var a, Var s) {
  const double sv = s.scalar();
  int ia = a.id(), is = s.id();
  return G(a).AddNode(a.value() * sv, {ia, is}, [ia, is](Graph& g, int self) {
    const Matrix& dy = g.grad(self);
    if (g.requires_grad(ia)) g.AccumulateExpr(ia, dy * g.value(is)(0, 0));
    if (g.requires_grad(is)) {
      Matrix d(1, 1);
      d(0, 0) = dy.cwiseProduct(g.value(ia)).sum();
      g.Accumulate(is, d);
    }
  });
}

Var Hadamard(Var a, Var b) {
  CheckSameShape(a.value(), b.value(), "Hadamard");
  int ia = a.id(), ib = b.id();
  return G(a).AddNode(a.value().cwiseProduct(b.value()), {ia, ib},
                      [ia, ib](Graph& g, int self) {
                        const Matrix& dy = g.grad(self);
                        if (g.requires_grad(ia)) {
                          g.AccumulateExpr(ia, dy.cwiseProduct(g.value(ib)));
                        }
                        if (g.requires_grad(ib)) {
                          g.AccumulateExpr(ib, dy.cwiseProduct(g.value(ia)));
                        }
                      });
}

Var AddScalar(Var a, double c) {
  int ia = a.id();
  return G(a).AddNode(a.value().array() + c, {ia}, [ia](Graph& g, int self) {
    g.Accumulate(ia, g.grad(self));
  });
}

Var Gelu(Var a) {
  int ia = a.id();
  return G(a).AddNode(a.value().unaryExpr(&GeluValue), {ia},
                      [ia](Graph& g, int self) {
                        g.AccumulateExpr(
                            ia, g.grad(self).cwiseProduct(
                                    g.value(ia).unaryExpr(&GeluGrad)));
                      });
}

Var Exp(Var a) {
  int ia = a.id();
  Matrix out = a.value().array().exp();
  return G(a).AddNode(std::move(out), {ia}, [ia](Graph& g, int self) {
    g.AccumulateExpr(ia, g.grad(self).cwiseProduct(g.value(self)));
  });
}

Var Log(Var a) {
  int ia = a.id();
  Matrix out = a.value().array().log();
  return G(a).AddNode(std::move(out), {ia}, [ia](Graph& g, int self) {
    g.AccumulateExpr(ia, g.grad(self).cwiseQuotient(g.value(ia)));
  });
}

Var Square(Var a) {
  int ia = a.id();
  return G(a).AddNode(a.value().array().square(), {ia},
                      [ia](Graph& g, int self) {
                        g.AccumulateExpr(
                            ia, 2.0 * g.grad(self).cwiseProduct(g.value(ia)));
                      });
}

Var Relu(Var a) {
  int ia = a.id();
  return G(a).AddNode(a.value().cwiseMax(0.0), {ia}, [ia](Graph& g, int self) {
    const Matrix& x = g.value(ia);
    Matrix d = g.grad(self);
    for (Eigen::Index i = 0; i < d.size(); ++i) {
      if (!(x.data()[i] > 0.0)) d.data()[i] = 0.0;
    }
    g.Accumulate(ia, d);
  });
}

Var Sum(Var a) {
  int ia = a.id();
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return G(a).AddNode(std::move(out), {ia}, [ia](Graph& g, int self) {
    const Matrix& x = g.value(ia);
    g.AccumulateExpr(
        ia, Matrix::Constant(x.rows(), x.cols(), g.grad(self)(0, 0)));
  });
}

Var Mean(Var a) {
  const double n = static_cast<double>(a.value().size());
  return Scale(Sum(a), 1.0 / n);
}

Var RowSum(Var a) {
  int ia = a.id();
  Matrix out = a.value().rowwise().sum();
  return G(a).AddNode(std::move(out), {ia}, [ia](Graph& g, int self) {
    const Matrix& x = g.value(ia);
    Matrix d(x.rows(), x.cols());
    d.colwise() = g.grad(self).col(0);
    g.Accumulate(ia, d);
  });
}

Var MeanRows(Var a) {
  int ia = a.id();
  const double n = static_cast<double>(a.rows());
  Matrix out = a.value().colwise().sum() / n;
  return G(a).AddNode(std::move(out), {ia}, [ia, n](Graph& g, int self) {
    const Matrix& x = g.value(ia);
    Matrix d(x.rows(), x.cols());
    d.rowwise() = g.grad(self).row(0) / n;
    g.Accumulate(ia, d);
  });
}

Var RowNorm(Var a) {
  int ia = a.id();
  Matrix out = a.value().rowwise().norm();
  return G(a).AddNode(std::move(out), {ia}, [ia](Graph& g, int self) {
    const Matrix& x = g.value(ia);
    const Matrix& n = g.value(self);
    const Matrix& dy = g.grad(self);
    Matrix d(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      d.row(i) = x.row(i) * (dy(i, 0) / n(i, 0));
    }
    g.Accumulate(ia, d);
  });
}

Var NormalizeRows(Var a) {
  const Matrix& x = a.value();
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double n = x.row(i).norm();
    if (!(n > 0.0)) throw std::domain_error("NormalizeRows: zero row");
    out.row(i) = x.row(i) / n;
  }
  int ia = a.id();
  return G(a).AddNode(std::move(out), {ia}, [ia](Graph& g, int self) {
    const Matrix& x = g.value(ia);
    const Matrix& u = g.value(self);
    const Matrix& dy = g.grad(self);
    Matrix d(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const double n = x.row(i).norm();
      const double proj = dy.row(i).dot(u.row(i));
      d.row(i) = (dy.row(i) - proj * u.row(i)) / n;
    }
    g.Accumulate(ia, d);
  });
}

Var RmsNormRows(Var a, const Var* gain, double eps) {
  const Matrix& x = a.value();
  const Eigen::Index n = x.cols();
  Matrix normed(x.rows(), n);
  Matrix inv(x.rows(), 1);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    inv(i, 0) = 1.0 / std::sqrt(x.row(i).squaredNorm() / n + eps);
    normed.row(i) = x.row(i) * inv(i, 0);
  }
  Matrix out = normed;
  std::vector<int> inputs = {a.id()};
  int ig = -1;
  if (gain != nullptr) {
    if (gain->rows() != 1 || gain->cols() != n) {
      throw std::invalid_argument("RmsNormRows: gain shape");
    }
    ig = gain->id();
    inputs.push_back(ig);
    out.array().rowwise() *= gain->value().row(0).array();
  }
  int ia = a.id();
  return G(a).AddNode(
      std::move(out), inputs,
      [ia, ig, normed = std::move(normed), inv = std::move(inv)](Graph& g,
                                                                  int self) {
        const Matrix& dy = g.grad(self);
        const Eigen::Index n = dy.cols();
        Matrix dn = dy;
        if (ig >= 0) {
          dn.array().rowwise() *= g.value(ig).row(0).array();
          if (g.requires_grad(ig)) {
            g.AccumulateExpr(ig, dy.cwiseProduct(normed).colwise().sum());
          }
        }
        if (g.requires_grad(ia)) {
          Matrix d(dy.rows(), n);
          for (Eigen::Index i = 0; i < dy.rows(); ++i) {
            const double dot = dn.row(i).dot(normed.row(i));
            d.row(i) = inv(i, 0) * (dn.row(i) - normed.row(i) * (dot / n));
          }
          g.Accumulate(ia, d);
        }
      });
}

Var LayerNormRows(Var a, const Var* gain, const Var* bias, double eps) {
  const Matrix& x = a.value();
  const Eigen::Index n = x.cols();
  Matrix normed(x.rows(), n);
  Matrix inv(x.rows(), 1);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double mu = x.row(i).mean();
    RowVector c = x.row(i).array() - mu;
    const double var = c.squaredNorm() / n;
    inv(i, 0) = 1.0 / std::sqrt(var + eps);
    normed.row(i) = c * inv(i, 0);
  }
  Matrix out = normed;
  std::vector<int> inputs = {a.id()};
  int ig = -1, ib = -1;
  if (gain != nullptr) {
    if (gain->rows() != 1 || gain->cols() != n) {
      throw std::invalid_argument("LayerNormRows: gain shape");
    }
    ig = gain->id();
    inputs.push_back(ig);
    out.array().rowwise() *= gain->value().row(0).array();
  }
  if (bias != nullptr) {
    if (bias->rows() != 1 || bias->cols() != n) {
      throw std::invalid_argument("LayerNormRows: bias shape");
    }
    ib = bias->id();
    inputs.push_back(ib);
    out.rowwise() += bias->value().row(0);
  }
  int ia = a.id();
  return G(a).AddNode(
      std::move(out), inputs,
      [ia, ig, ib, normed = std::move(normed), inv = std::move(inv)](
          Graph& g, int self) {
        const Matrix& dy = g.grad(self);
        const Eigen::Index n = dy.cols();
        Matrix dn = dy;
        if (ig >= 0) {
          dn.array().rowwise() *= g.value(ig).row(0).array();
          if (g.requires_grad(ig)) {
            g.AccumulateExpr(ig, dy.cwiseProduct(normed).colwise().sum());
          }
        }
        if (ib >= 0 && g.requires_grad(ib)) {
          g.AccumulateExpr(ib, dy.colwise().sum());
        }
        if (g.requires_grad(ia)) {
          Matrix d(dy.rows(), n);
          for (Eigen::Index i = 0; i < dy.rows(); ++i) {
            const double mean_dn = dn.row(i).mean();
            const double dot = dn.row(i).dot(normed.row(i)) / n;
            d.row(i) = inv(i, 0) * (dn.row(i).array() - mean_dn -
                                    normed.row(i).array() * dot)
                                       .matrix();
          }
          g.Accumulate(ia, d);
        }
      });
}

Var SoftmaxRows(Var a, const Matrix* additive_mask) {
  Matrix x = a.value();
  if (additive_mask != nullptr) {
    CheckSameShape(x, *additive_mask, "SoftmaxRows");
    x += *additive_mask;
  }
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double m = x.row(i).maxCoeff();
    x.row(i) = (x.row(i).array() - m).exp();
    x.row(i) /= x.row(i).sum();
  }
  int ia = a.id();
  return G(a).AddNode(std::move(x), {ia}, [ia](Graph& g, int self) {
    const Matrix& p = g.value(self);
    const Matrix& dy = g.grad(self);
    Matrix d(p.rows(), p.cols());
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
      const double dot = dy.row(i).dot(p.row(i));
      d.row(i) = p.row(i).cwiseProduct(
          (dy.row(i).array() - dot).matrix());
    }
    g.Accumulate(ia, d);
  });
}

Var CrossEntropy(Var logits, std::span<const int> targets) {
  const Matrix& x = logits.value();
  if (static_cast<Eigen::Index>(targets.size()) != x.rows()) {
    throw std::invalid_argument("CrossEntropy: target count");
  }
  Matrix probs(x.rows(), x.cols());
  double total = 0.0;
  int count = 0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double m = x.row(i).maxCoeff();
    probs.row(i) = (x.row(i).array() - m).exp();
    const double z = probs.row(i).sum();
    probs.row(i) /= z;
    const int t = targets[i];
    if (t < 0) continue;
    if (t >= x.cols()) throw std::out_of_range("CrossEntropy: target id");
    total += -(x(i, t) - m - std::log(z));
    ++count;
  }
  if (count == 0) throw std::invalid_argument("CrossEntropy: no targets");
  Matrix out(1, 1);
  out(0, 0) = total / count;
  int il = logits.id();
  std::vector<int> tg(targets.begin(), targets.end());
  return G(logits).AddNode(
      std::move(out), {il},
      [il, tg = std::move(tg), probs = std::move(probs), count](Graph& g,
                                                               int self) {
        const double dy = g.grad(self)(0, 0) / count;
        Matrix d = Matrix::Zero(probs.rows(), probs.cols());
        for (Eigen::Index i = 0; i < probs.rows(); ++i) {
          if (tg[i] < 0) continue;
          d.row(i) = probs.row(i) * dy;
          d(i, tg[i]) -= dy;
        }
        g.Accumulate(il, d);
      });
}

Var SliceCols(Var a, Eigen::Index start, Eigen::Index count) {
  const Matrix& x = a.value();
  if (start < 0 || start + count > x.cols()) {
    throw std::out_of_range("SliceCols");
  }
  int ia = a.id();
  return G(a).AddNode(x.middleCols(start, count), {ia},
                      [ia, start, count](Graph& g, int self) {
                        if (!g.requires_grad(ia)) return;
                        g.grad(ia).middleCols(start, count) += g.grad(self);
                      });
}

Var SliceRows(Var a, Eigen::Index start, Eigen::Index count) {
  const Matrix& x = a.value();
  if (start < 0 || start + count > x.rows()) {
    throw std::out_of_range("SliceRows");
  }
  int ia = a.id();
  return G(a).AddNode(x.middleRows(start, count), {ia},
                      [ia, start, count](Graph& g, int self) {
                        if (!g.requires_grad(ia)) return;
                        g.grad(ia).middleRows(start, count) += g.grad(self);
                      });
}

Var ConcatRows(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("ConcatRows: empty");
  const Eigen::Index cols = parts[0].cols();
  Eigen::Index rows = 0;
  std::vector<int> ids;
  for (const Var& p : parts) {
    if (p.cols() != cols) throw std::invalid_argument("ConcatRows: cols");
    rows += p.rows();
    ids.push_back(p.id());
  }
  Matrix out(rows, cols);
  Eigen::Index r = 0;
  for (const Var& p : parts) {
    out.middleRows(r, p.rows()) = p.value();
    r += p.rows();
  }
  return G(parts[0]).AddNode(std::move(out), ids, [ids](Graph& g, int self) {
    Eigen::Index r = 0;
    for (int id : ids) {
      const Eigen::Index n = g.value(id).rows();
      if (g.requires_grad(id)) g.AccumulateExpr(id, g.grad(self).middleRows(r, n));
      r += n;
    }
  });
}

Var ConcatCols(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("ConcatCols: empty");
  const Eigen::Index rows = parts[0].rows();
  Eigen::Index cols = 0;
  std::vector<int> ids;
  for (const Var& p : parts) {
    if (p.rows() != rows) throw std::invalid_argument("ConcatCols: rows");
    cols += p.cols();
    ids.push_back(p.id());
  }
  Matrix out(rows, cols);
  Eigen::Index c = 0;
  for (const Var& p : parts) {
    out.middleCols(c, p.cols()) = p.value();
    c += p.cols();
  }
  return G(parts[0]).AddNode(std::move(out), ids, [ids](Graph& g, int self) {
    Eigen::Index c = 0;
    for (int id : ids) {
      const Eigen::Index n = g.value(id).cols();
      if (g.requires_grad(id)) g.AccumulateExpr(id, g.grad(self).middleCols(c, n));
      c += n;
    }
  });
}

Var ScatterRows(Var base, std::span<const int> positions, Var values) {
  const Matrix& b = base.value();
  const Matrix& v = values.value();
  if (static_cast<Eigen::Index>(positions.size()) != v.rows() ||
      v.cols() != b.cols()) {
    throw std::invalid_argument("ScatterRows: shape");
  }
  Matrix out = b;
  for (size_t k = 0; k < positions.size(); ++k) {
    if (positions[k] < 0 || positions[k] >= b.rows()) {
      throw std::out_of_range("ScatterRows: position");
    }
    out.row(positions[k]) = v.row(static_cast<Eigen::Index>(k));
  }
  int ib = base.id(), iv = values.id();
  std::vector<int> pos(positions.begin(), positions.end());
  return G(base).AddNode(
      std::move(out), {ib, iv}, [ib, iv, pos = std::move(pos)](Graph& g, int self) {
        const Matrix& dy = g.grad(self);
        if (g.requires_grad(ib)) {
          Matrix d = dy;
          for (int p : pos) d.row(p).setZero();
          g.Accumulate(ib, d);
        }
        if (g.requires_grad(iv)) {
          Matrix d(static_cast<Eigen::Index>(pos.size()), dy.cols());
          for (size_t k = 0; k < pos.size(); ++k) {
            d.row(static_cast<Eigen::Index>(k)) = dy.row(pos[k]);
          }
          g.Accumulate(iv, d);
        }
      });
}

Var MaskMul(Var a, const Matrix& mask) {
  CheckSameShape(a.value(), mask, "MaskMul");
  int ia = a.id();
  return G(a).AddNode(a.value().cwiseProduct(mask), {ia},
                      [ia, mask](Graph& g, int self) {
                        g.AccumulateExpr(ia, g.grad(self).cwiseProduct(mask));
                      });
}

namespace {

// Rotates consecutive (even, odd) column pairs inside each head by
// position-dependent angles; sign = -1 applies the inverse rotation.
Matrix ApplyRope(const Matrix& x, int num_heads, double base, double sign) {
  const Eigen::Index head_dim = x.cols() / num_heads;
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index pos = 0; pos < x.rows(); ++pos) {
    for (int h = 0; h < num_heads; ++h) {
      const Eigen::Index off = h * head_dim;
      for (Eigen::Index i = 0; i < head_dim / 2; ++i) {
        const double freq =
            std::pow(base, -2.0 * static_cast<double>(i) / head_dim);
        const double angle = sign * static_cast<double>(pos) * freq;
        const double c = std::cos(angle), s = std::sin(angle);
        const double x0 = x(pos, off + 2 * i), x1 = x(pos, off + 2 * i + 1);
        out(pos, off + 2 * i) = x0 * c - x1 * s;
        out(pos, off + 2 * i + 1) = x0 * s + x1 * c;
      }
    }
  }
  return out;
}

}  // namespace

Var Rope(Var a, int num_heads, double base) {
  const Matrix& x = a.value();
  if (num_heads <= 0 || x.cols() % num_heads != 0 ||
      (x.cols() / num_heads) % 2 != 0) {
    throw std::invalid_argument("Rope: head_dim must be even");
  }
  int ia = a.id();
  return G(a).AddNode(ApplyRope(x, num_heads, base, 1.0), {ia},
                      [ia, num_heads, base](Graph& g, int self) {
                        g.Accumulate(ia, ApplyRope(g.grad(self), num_heads,
                                                   base, -1.0));
                      });
}

Var Detach(Var a) { return G(a).Constant(a.value()); }

}  // namespace ops
}  // namespace slotbridge
