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

// Reference implementations used only by tests. They deliberately avoid the
// library's code paths: plain nested loops over std::vector, explicit
// log-sum-exp, list-based queues and sort-based ranking.

#ifndef SLOTBRIDGE_TESTS_ORACLES_H_
#define SLOTBRIDGE_TESTS_ORACLES_H_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "slotbridge/autograd.h"

namespace slotbridge::oracle {

using Vec = std::vector<double>;
using Mat = std::vector<Vec>;

inline Mat ToMat(const Matrix& m) {
  Mat out(m.rows(), Vec(m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) out[i][j] = m(i, j);
  }
  return out;
}

inline Matrix FromMat(const Mat& m, size_t cols) {
  Matrix out(m.size(), cols);
  for (size_t i = 0; i < m.size(); ++i) {
    for (size_t j = 0; j < cols; ++j) out(i, j) = m[i][j];
  }
  return out;
}

inline double Dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double Norm(const Vec& a) { return std::sqrt(Dot(a, a)); }

inline Vec Unit(const Vec& a) {
  const double n = Norm(a);
  Vec out(a.size());
  for (size_t i = 0; i < a.size(); ++i) out[i] = a[i] / n;
  return out;
}

// -log softmax(logits)[target] with an explicit max shift.
inline double NegLogSoftmax(const Vec& logits, size_t target) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : logits) mx = std::max(mx, v);
  double s = 0.0;
  for (double v : logits) s += std::exp(v - mx);
  return -(logits[target] - mx - std::log(s));
}

// Symmetric InfoNCE with hard negatives on the p->h side only.
inline double InfoNce(const Mat& p, const Mat& h, const Mat& negs, double tau) {
  const size_t n = p.size();
  double fwd = 0.0, bwd = 0.0;
  for (size_t i = 0; i < n; ++i) {
    Vec logits;
    for (size_t j = 0; j < n; ++j) logits.push_back(Dot(Unit(p[i]), Unit(h[j])) / tau);
    for (const Vec& q : negs) logits.push_back(Dot(Unit(p[i]), Unit(q)) / tau);
    fwd += NegLogSoftmax(logits, i);
  }
  for (size_t j = 0; j < n; ++j) {
    Vec logits;
    for (size_t i = 0; i < n; ++i) logits.push_back(Dot(Unit(h[j]), Unit(p[i])) / tau);
    bwd += NegLogSoftmax(logits, j);
  }
  return 0.5 * (fwd / n + bwd / n);
}

inline double Direction(const Mat& p, const Mat& h) {
  double s = 0.0;
  for (size_t i = 0; i < p.size(); ++i) {
    const Vec a = Unit(p[i]), b = Unit(h[i]);
    for (size_t j = 0; j < a.size(); ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
  }
  return s / p.size();
}

inline double LogNorm(const Mat& p, const Mat& h) {
  double s = 0.0;
  for (size_t i = 0; i < p.size(); ++i) {
    const double d = std::log(Norm(p[i])) - std::log(Norm(h[i]));
    s += d * d;
  }
  return s / p.size();
}

inline double Contrast(double sft, double zero, double weight) {
  return sft > zero ? weight * (sft - zero) : 0.0;
}

// 1 - cos averaged over rows.
inline double CosAux(const Mat& s, const Mat& t) {
  double sum = 0.0;
  for (size_t i = 0; i < s.size(); ++i) sum += 1.0 - Dot(Unit(s[i]), Unit(t[i]));
  return sum / s.size();
}

// One-directional InfoNCE: row i of s against all rows of t.
inline double NceAux(const Mat& s, const Mat& t, double tau) {
  if (s.size() < 2) return 0.0;
  double sum = 0.0;
  for (size_t i = 0; i < s.size(); ++i) {
    Vec logits;
    for (size_t j = 0; j < t.size(); ++j) logits.push_back(Dot(Unit(s[i]), Unit(t[j])) / tau);
    sum += NegLogSoftmax(logits, i);
  }
  return sum / s.size();
}

// Mean token cross-entropy over positions with label >= 0.
inline double TokenCrossEntropy(const Mat& logits, const std::vector<int>& labels) {
  double sum = 0.0;
  int count = 0;
  for (size_t t = 0; t < labels.size(); ++t) {
    if (labels[t] < 0) continue;
    sum += NegLogSoftmax(logits[t], labels[t]);
    ++count;
  }
  return sum / count;
}

// Every finite binary16 value, ascending, built from its definition.
inline const std::vector<double>& HalfTable() {
  static const std::vector<double> table = [] {
    std::vector<double> pos;
    for (int m = 0; m < 1024; ++m) pos.push_back(std::ldexp(m / 1024.0, -14));
    for (int e = -14; e <= 15; ++e) {
      for (int m = 0; m < 1024; ++m) pos.push_back(std::ldexp(1.0 + m / 1024.0, e));
    }
    std::vector<double> all;
    for (auto it = pos.rbegin(); it != pos.rend(); ++it) {
      if (*it != 0.0) all.push_back(-*it);
    }
    all.insert(all.end(), pos.begin(), pos.end());
    return all;
  }();
  return table;
}

// Round-to-nearest-even against the table. In-range inputs only.
inline double RoundHalf(double x) {
  const auto& t = HalfTable();
  if (x == 0.0) return std::signbit(x) ? -0.0 : 0.0;
  auto hi = std::lower_bound(t.begin(), t.end(), x);
  if (hi != t.end() && *hi == x) return x;
  if (hi == t.begin()) return *hi;
  if (hi == t.end()) return t.back();
  auto lo = hi - 1;
  const double dl = x - *lo, dh = *hi - x;
  if (dl < dh) return *lo;
  if (dh < dl) return *hi;
  // Tie. Adjacent table entries alternate significand parity (including
  // across binade boundaries), and 0 has an even significand.
  const auto zero = std::lower_bound(t.begin(), t.end(), 0.0);
  const bool lo_even = ((lo - zero) % 2) == 0;
  const double r = lo_even ? *lo : *hi;
  return (r == 0.0 && x < 0) ? -0.0 : r;
}

// FIFO of rounded unit vectors with max-over-batch mining.
class ListQueue {
 public:
  explicit ListQueue(size_t capacity) : capacity_(capacity) {}

  void Push(const Mat& rows) {
    for (const Vec& r : rows) {
      Vec u = Unit(r);
      for (double& v : u) v = RoundHalf(v);
      entries_.push_back(u);
      if (entries_.size() > capacity_) entries_.pop_front();
    }
  }

  Mat Mine(const Mat& batch, size_t k, std::optional<double> guard) const {
    struct Scored {
      double score;
      size_t age;  // 0 = oldest
    };
    std::vector<Scored> scored;
    for (size_t i = 0; i < entries_.size(); ++i) {
      double best = -std::numeric_limits<double>::infinity();
      for (const Vec& b : batch) {
        best = std::max(best, Dot(entries_[i], b) / (Norm(entries_[i]) * Norm(b)));
      }
      if (guard && best > *guard) continue;
      scored.push_back({best, i});
    }
    std::stable_sort(scored.begin(), scored.end(),
                     [](const Scored& a, const Scored& b) { return a.score > b.score; });
    Mat out;
    for (size_t i = 0; i < std::min(k, scored.size()); ++i) {
      out.push_back(entries_[scored[i].age]);
    }
    return out;
  }

  const std::deque<Vec>& entries() const { return entries_; }

 private:
  size_t capacity_;
  std::deque<Vec> entries_;
};

// Gold rank of row i: position of candidate i after sorting the row by
// score descending with index ascending as tie-break.
inline std::vector<int> SortRanks(const Mat& scores) {
  std::vector<int> ranks;
  for (size_t i = 0; i < scores.size(); ++i) {
    std::vector<size_t> order(scores[i].size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
      return scores[i][a] > scores[i][b];
    });
    const auto it = std::find(order.begin(), order.end(), i);
    ranks.push_back(static_cast<int>(it - order.begin()) + 1);
  }
  return ranks;
}

struct Metrics {
  double r1, r5, r10, mrr, mean_rank;
};

inline Metrics MetricsFromRanks(const std::vector<int>& ranks) {
  Metrics m{0, 0, 0, 0, 0};
  for (int r : ranks) {
    m.r1 += r <= 1;
    m.r5 += r <= 5;
    m.r10 += r <= 10;
    m.mrr += 1.0 / r;
    m.mean_rank += r;
  }
  const double n = static_cast<double>(ranks.size());
  m.r1 /= n;
  m.r5 /= n;
  m.r10 /= n;
  m.mrr /= n;
  m.mean_rank /= n;
  return m;
}

// Largest relative error between analytic gradients and central differences
// of loss() with respect to every entry of params. The relative error of an
// entry is |a - n| / max(|a|, |n|, floor).
inline double GradCheck(const std::vector<Parameter*>& params,
                        const std::function<double()>& loss,
                        const std::function<void()>& backward, double step = 1e-5,
                        double floor = 1e-6) {
  for (Parameter* p : params) p->ZeroGrad();
  backward();
  double worst = 0.0;
  for (Parameter* p : params) {
    const Matrix analytic = p->grad;
    for (Eigen::Index i = 0; i < p->value.size(); ++i) {
      double& x = p->value.data()[i];
      const double saved = x;
      x = saved + step;
      const double up = loss();
      x = saved - step;
      const double down = loss();
      x = saved;
      const double numeric = (up - down) / (2 * step);
      const double a = analytic.data()[i];
      const double denom = std::max({std::fabs(a), std::fabs(numeric), floor});
      worst = std::max(worst, std::fabs(a - numeric) / denom);
    }
  }
  return worst;
}

inline Matrix RandomMatrix(std::mt19937_64& rng, int rows, int cols, double std = 1.0) {
  std::normal_distribution<double> dist(0.0, std);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

// The 256-symbol printable byte alphabet of byte-level BPE, indexed by byte:
// printable Latin-1 bytes stand for themselves, the rest are shifted to
// U+0100 upward in byte order.
inline std::vector<std::string> ByteSymbols() {
  auto utf8 = [](char32_t c) {
    std::string s;
    if (c < 0x80) {
      s += static_cast<char>(c);
    } else {
      s += static_cast<char>(0xC0 | (c >> 6));
      s += static_cast<char>(0x80 | (c & 0x3F));
    }
    return s;
  };
  std::vector<std::string> out(256);
  char32_t next = 256;
  for (int b = 0; b < 256; ++b) {
    const bool printable = (b >= '!' && b <= '~') || (b >= 0xA1 && b <= 0xAC) || b >= 0xAE;
    out[b] = utf8(printable ? static_cast<char32_t>(b) : next++);
  }
  return out;
}

}  // namespace slotbridge::oracle

#endif  // SLOTBRIDGE_TESTS_ORACLES_H_
