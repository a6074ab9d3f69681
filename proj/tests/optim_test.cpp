// Copyright 2026 The mimoe Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "mimoe/optim.hpp"

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "mimoe/errors.hpp"
#include "mimoe/ops.hpp"
#include "test_util.hpp"

namespace mimoe {
namespace {

using testing::values;

ParameterList one(const Tensor& t, const char* name = "w") { return {{name, t}}; }

void set_grad(Tensor& t, const std::vector<double>& g) {
  Tape tape;
  Tape::Scope scope(tape);
  tape.backward(sum(mul(t, Tensor::from(t.shape(), g))));
}

TEST(AdamWTest, ZeroGradientsLeaveParametersUnchanged) {
  Tensor w = Tensor::from({3}, {1.0, -2.0, 0.5}, true);
  AdamW opt(one(w), {.lr = 0.1});
  for (int i = 0; i < 5; ++i) opt.step();
  EXPECT_EQ(values(w), (std::vector<double>{1.0, -2.0, 0.5}));
  EXPECT_EQ(opt.steps(), 5u);
}

TEST(AdamWTest, FirstStepMovesByLearningRate) {
  Tensor w = Tensor::from({4}, {1.0, 1.0, 1.0, 1.0}, true);
  set_grad(w, {0.3, -7.0, 1e-3, 100.0});
  AdamW opt(one(w), {.lr = 0.01});
  opt.step();
  // m_hat = g, v_hat = g^2 after correction: step = lr * g / (|g| + eps).
  const std::vector<double> g{0.3, -7.0, 1e-3, 100.0};
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_NEAR(w[i], 1.0 - 0.01 * g[i] / (std::abs(g[i]) + 1e-8), 1e-15);
  }
}

TEST(AdamWTest, MatchesReferenceRecursion) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0, 1);
  Tensor w = Tensor::from({2}, {0.4, -0.3}, true);
  AdamWOptions o{.lr = 0.05, .beta1 = 0.8, .beta2 = 0.95, .eps = 1e-6, .weight_decay = 0.1};
  AdamW opt(one(w), o);
  double p[2] = {0.4, -0.3}, m[2] = {}, v[2] = {};
  for (int t = 1; t <= 20; ++t) {
    const std::vector<double> g{n(rng), n(rng)};
    w.zero_grad();
    set_grad(w, g);
    opt.step();
    for (int i = 0; i < 2; ++i) {
      m[i] = o.beta1 * m[i] + (1 - o.beta1) * g[i];
      v[i] = o.beta2 * v[i] + (1 - o.beta2) * g[i] * g[i];
      const double mh = m[i] / (1 - std::pow(o.beta1, t));
      const double vh = v[i] / (1 - std::pow(o.beta2, t));
      p[i] = p[i] * (1 - o.lr * o.weight_decay) - o.lr * mh / (std::sqrt(vh) + o.eps);
      ASSERT_NEAR(w[i], p[i], 1e-13) << "step " << t;
    }
  }
}

TEST(AdamWTest, WeightDecayIsDecoupled) {
  Tensor w = Tensor::from({1}, {2.0}, true);
  AdamW opt(one(w), {.lr = 0.1, .weight_decay = 0.5});
  opt.step();  // zero gradient: only the decay acts
  EXPECT_NEAR(w[0], 2.0 * (1 - 0.05), 1e-15);
}

TEST(AdamWTest, ZeroLearningRateFreezes) {
  Tensor w = Tensor::from({2}, {1.0, 2.0}, true);
  set_grad(w, {5.0, -5.0});
  AdamW opt(one(w), {.lr = 0.0, .weight_decay = 0.3});
  opt.step();
  EXPECT_EQ(values(w), (std::vector<double>{1.0, 2.0}));
}

TEST(AdamWTest, ZeroGradResets) {
  Tensor w = Tensor::from({2}, {1.0, 2.0}, true);
  set_grad(w, {5.0, -5.0});
  AdamW opt(one(w), {});
  opt.zero_grad();
  EXPECT_EQ(w.grad(), (std::vector<double>{0.0, 0.0}));
}

TEST(AdamWTest, RejectsNegativeOptions) {
  Tensor w = Tensor::zeros({1}, true);
  EXPECT_THROW(AdamW(one(w), {.lr = -1e-3}), ConfigError);
  EXPECT_THROW(AdamW(one(w), {.weight_decay = -1.0}), ConfigError);
}

TEST(PartitionTest, AcceptsExactCover) {
  Tensor a = Tensor::zeros({1}, true), b = Tensor::zeros({2}, true), c = Tensor::zeros({3}, true);
  ParameterList all{{"a", a}, {"b", b}, {"c", c}};
  EXPECT_NO_THROW(check_partition(all, {{"a", a}}, {{"b", b}, {"c", c}}));
}

TEST(PartitionTest, RejectsOverlapGapAndDuplicates) {
  Tensor a = Tensor::zeros({1}, true), b = Tensor::zeros({2}, true), c = Tensor::zeros({3}, true);
  ParameterList all{{"a", a}, {"b", b}, {"c", c}};
  EXPECT_THROW(check_partition(all, {{"a", a}, {"b", b}}, {{"b", b}, {"c", c}}),
               std::logic_error);
  EXPECT_THROW(check_partition(all, {{"a", a}}, {{"b", b}}), std::logic_error);
  ParameterList dup{{"a", a}, {"a2", a}, {"b", b}};
  EXPECT_THROW(check_partition(dup, {{"a", a}}, {{"b", b}}), std::logic_error);
  Tensor stray = Tensor::zeros({1}, true);
  EXPECT_THROW(check_partition(all, {{"a", a}}, {{"b", b}, {"c", c}, {"s", stray}}),
               std::logic_error);
}

}  // namespace
}  // namespace mimoe
