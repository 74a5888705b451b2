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
#include <random>

#include <gtest/gtest.h>

#include "oracles/oracles.h"

namespace slotbridge {
namespace {

using oracle::RandomMatrix;

void Randomize(const std::vector<Parameter*>& params, std::mt19937_64& rng, double std) {
  for (Parameter* p : params) p->value = RandomMatrix(rng, p->value.rows(), p->value.cols(), std);
}

TEST(ProjectorTest, ShapesAndLayerNormOutput) {
  Rng rng(1);
  Projector proj({.input_dim = 6, .hidden_dim = 8, .output_dim = 5, .layer_norm_eps = 1e-12},
                 rng);
  std::mt19937_64 gen(1);
  const Matrix out = proj.ProjectBatch(RandomMatrix(gen, 3, 6));
  ASSERT_EQ(out.rows(), 3);
  ASSERT_EQ(out.cols(), 5);
  // Unit gain, zero bias and negligible eps: rows have zero mean, unit variance.
  for (int i = 0; i < 3; ++i) {
    EXPECT_NEAR(out.row(i).mean(), 0.0, 1e-9);
    EXPECT_NEAR(out.row(i).squaredNorm() / 5, 1.0, 1e-4);
  }
  Graph g;
  EXPECT_THROW(proj.Forward(g, g.Constant(Matrix::Ones(1, 4)), false, nullptr),
               std::invalid_argument);
  EXPECT_THROW(proj.Forward(g, g.Constant(Matrix::Ones(1, 6)), true, nullptr),
               std::invalid_argument);
}

TEST(ProjectorTest, GradientsMatchFiniteDifferences) {
  Rng init(2);
  Projector proj({.input_dim = 5, .hidden_dim = 8, .output_dim = 6, .dropout = 0.25}, init);
  std::mt19937_64 gen(2);
  Randomize(proj.Parameters(), gen, 0.5);
  const Matrix z = RandomMatrix(gen, 3, 5);
  const Matrix w = RandomMatrix(gen, 3, 6);
  auto build = [&](Graph& g) {
    Rng dropout(99);  // same mask on every evaluation
    Var y = proj.Forward(g, g.Constant(z), true, &dropout);
    return ops::Sum(ops::Hadamard(y, g.Constant(w)));
  };
  const double err = oracle::GradCheck(
      proj.Parameters(),
      [&] {
        Graph g;
        return build(g).scalar();
      },
      [&] {
        Graph g;
        g.Backward(build(g));
      });
  EXPECT_LT(err, 1e-4);
}

TEST(ProjectorTest, FrozenProjectorHasNoGradients) {
  Rng init(3);
  Projector proj({.input_dim = 4, .hidden_dim = 8, .output_dim = 4}, init);
  proj.set_frozen(true);
  Graph g;
  Var y = proj.Forward(g, g.Constant(Matrix::Ones(2, 4)), false, nullptr);
  EXPECT_FALSE(y.requires_grad());
}

TEST(ProjectorTest, BundleRoundTripIsBitExact) {
  Rng init(4);
  Projector proj({.input_dim = 4, .hidden_dim = 8, .output_dim = 4}, init);
  TensorBundle b;
  proj.AppendTo(b);
  const Projector back = Projector::FromBundle(b);
  EXPECT_EQ(back.Digest(), proj.Digest());
  EXPECT_EQ(back.ProjectBatch(Matrix::Ones(2, 4)), proj.ProjectBatch(Matrix::Ones(2, 4)));
}

TEST(ExpanderTest, GradientsOfExpanderAdapterAndScale) {
  Rng init(5);
  SlotExpander expander(6, 3, 0.7, init);
  VectorAdapter adapter(6, 4, init);
  std::mt19937_64 gen(5);
  // Non-zero up-projection so the down-projection gradient is exercised.
  Randomize(adapter.Parameters(), gen, 0.4);
  const Matrix p = RandomMatrix(gen, 1, 6);
  const Matrix w = RandomMatrix(gen, 3, 6);
  std::vector<Parameter*> params = expander.Parameters();
  for (Parameter* a : adapter.Parameters()) params.push_back(a);
  auto build = [&](Graph& g) {
    Var slots = ExpandSlots(g, expander, adapter, g.Constant(p));
    return ops::Sum(ops::Hadamard(slots, g.Constant(w)));
  };
  const double err = oracle::GradCheck(
      params,
      [&] {
        Graph g;
        return build(g).scalar();
      },
      [&] {
        Graph g;
        g.Backward(build(g));
      });
  EXPECT_LT(err, 1e-4);
  // The scale gradient on its own, since it is a single entry.
  const double scale_err = oracle::GradCheck(
      {&expander.scale_parameter()},
      [&] {
        Graph g;
        return build(g).scalar();
      },
      [&] {
        Graph g;
        g.Backward(build(g));
      });
  EXPECT_LT(scale_err, 1e-4);
}

TEST(ExpanderTest, SlotNormsEqualScaleTimesRootDim) {
  std::mt19937_64 gen(6);
  std::uniform_real_distribution<double> scale_dist(-3.0, 3.0);
  for (int t = 0; t < 200; ++t) {
    Rng init(t);
    SlotExpander expander(64, 8, scale_dist(gen), init);
    VectorAdapter adapter(64, 16, init);
    const Matrix slots = ExpandSlotsValue(expander, adapter, RandomMatrix(gen, 1, 64, 10.0));
    const double want = std::fabs(expander.scale()) * 8.0;
    for (int k = 0; k < 8; ++k) {
      ASSERT_NEAR(slots.row(k).norm() / want, 1.0, 1e-5);
    }
  }
}

TEST(ExpanderTest, FreshAdapterIsIdentityAndZeroVectorIsRejected) {
  Rng init(7);
  VectorAdapter adapter(5, 3, init);
  std::mt19937_64 gen(7);
  const Matrix x = RandomMatrix(gen, 2, 5);
  Graph g;
  EXPECT_EQ(adapter.Forward(g, g.Constant(x)).value(), x);
  SlotExpander expander(5, 2, 1.0, init);
  EXPECT_THROW(ExpandSlotsValue(expander, adapter, RowVector::Zero(5)), std::domain_error);
}

TEST(SlotPositionsTest, RequiresEachSlotOnceInOrder) {
  const std::vector<int> slots = {10, 11, 12};
  EXPECT_EQ(FindSlotPositions(std::vector<int>{1, 10, 11, 12, 2}, slots),
            (std::vector<int>{1, 2, 3}));
  EXPECT_THROW(FindSlotPositions(std::vector<int>{10, 11}, slots), std::invalid_argument);
  EXPECT_THROW(FindSlotPositions(std::vector<int>{10, 11, 12, 12}, slots),
               std::invalid_argument);
  EXPECT_THROW(FindSlotPositions(std::vector<int>{11, 10, 12}, slots), std::invalid_argument);
}

}  // namespace
}  // namespace slotbridge
