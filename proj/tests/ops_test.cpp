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

#include "mimoe/ops.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "mimoe/errors.hpp"
#include "test_util.hpp"

namespace mimoe {
namespace {

using testing::max_fd_error;
using testing::random_tensor;
using testing::values;
using testing::weighted;

TEST(MatmulTest, IdentityLeavesMatrix) {
  Tensor eye = Tensor::from({2, 2}, {1, 0, 0, 1});
  Tensor m = Tensor::from({2, 2}, {1, 2, 3, 4});
  EXPECT_EQ(values(matmul(eye, m)), values(m));
}

TEST(MatmulTest, RowTimesColumn) {
  Tensor r = matmul(Tensor::from({1, 2}, {1, 2}), Tensor::from({2, 1}, {3, 4}));
  EXPECT_EQ(r.shape(), (Shape{1, 1}));
  EXPECT_DOUBLE_EQ(r[0], 11.0);
}

TEST(MatmulTest, InnerDimMismatch) {
  EXPECT_THROW(matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3})), ShapeError);
}

TEST(MatmulTest, FlattensLeadingDims) {
  std::mt19937_64 rng(1);
  Tensor a = random_tensor({2, 3, 4}, rng);
  Tensor b = random_tensor({4, 5}, rng);
  Tensor r = matmul(a, b);
  ASSERT_EQ(r.shape(), (Shape{2, 3, 5}));
  double expect = 0.0;
  for (int k = 0; k < 4; ++k) expect += a[1 * 12 + 2 * 4 + k] * b[k * 5 + 3];
  EXPECT_NEAR(r[1 * 15 + 2 * 5 + 3], expect, 1e-12);
}

TEST(MatmulTest, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(2);
  Tensor a = random_tensor({3, 4}, rng);
  Tensor b = random_tensor({4, 2}, rng);
  EXPECT_LE(max_fd_error(weighted([=] { return matmul(a, b); }, rng), {a, b}), 1e-6);
}

TEST(BmmTest, MatchesPerBatchMatmul) {
  std::mt19937_64 rng(3);
  Tensor a = random_tensor({2, 3, 4}, rng);
  Tensor b = random_tensor({2, 5, 4}, rng);
  Tensor r = bmm(a, b, true);
  ASSERT_EQ(r.shape(), (Shape{2, 3, 5}));
  for (std::size_t n = 0; n < 2; ++n) {
    for (std::size_t i = 0; i < 3; ++i) {
      for (std::size_t j = 0; j < 5; ++j) {
        double s = 0;
        for (std::size_t k = 0; k < 4; ++k) s += a[n * 12 + i * 4 + k] * b[n * 20 + j * 4 + k];
        EXPECT_NEAR(r[n * 15 + i * 5 + j], s, 1e-12);
      }
    }
  }
}

TEST(SoftmaxTest, UniformOnZeros) {
  Tensor s = softmax(Tensor::zeros({4}), -1);
  for (double v : s.data()) EXPECT_DOUBLE_EQ(v, 0.25);
}

TEST(SoftmaxTest, StableOnLargeLogits) {
  Tensor s = softmax(Tensor::from({2}, {1000.0, 0.0}), -1);
  EXPECT_NEAR(s[0], 1.0, 1e-15);
  EXPECT_NEAR(s[1], 0.0, 1e-15);
  EXPECT_TRUE(std::isfinite(s[1]));
}

TEST(SoftmaxTest, GradientAtOneTwoThree) {
  std::mt19937_64 rng(4);
  Tensor x = Tensor::from({3}, {1, 2, 3});
  EXPECT_LE(max_fd_error(weighted([=] { return softmax(x, -1); }, rng), {x}), 1e-6);
}

TEST(SoftmaxTest, RowsSumToOneAndArePositive) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    Tensor x = random_tensor({3, 7}, rng, -30, 30);
    for (int axis : {0, 1}) {
      Tensor s = softmax(x, axis);
      Tensor total = sum(s, axis);
      for (double v : total.data()) EXPECT_NEAR(v, 1.0, 1e-12);
      for (double v : s.data()) EXPECT_GT(v, 0.0);
    }
  }
}

TEST(ActivationTest, KnownValues) {
  EXPECT_DOUBLE_EQ(sigmoid(Tensor::scalar(0.0)).item(), 0.5);
  EXPECT_DOUBLE_EQ(silu(Tensor::scalar(0.0)).item(), 0.0);
  EXPECT_NEAR(silu(Tensor::scalar(1.0)).item(), 0.7310585786300049, 1e-15);
  Tensor s = sigmoid(Tensor::from({3}, {-40, 0.3, 40}));
  for (double v : s.data()) {
    EXPECT_GT(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(CrossEntropyTest, UniformLogits) {
  const std::vector<std::size_t> t{0};
  EXPECT_NEAR(cross_entropy_logits(Tensor::zeros({1, 2}), t).item(), std::numbers::ln2, 1e-15);
}

TEST(CrossEntropyTest, SaturatedCorrectClass) {
  const std::vector<std::size_t> t{0};
  EXPECT_NEAR(cross_entropy_logits(Tensor::from({1, 2}, {10, -10}), t).item(), 0.0, 1e-8);
}

TEST(CrossEntropyTest, MatchesDirectFormula) {
  std::mt19937_64 rng(6);
  Tensor logits = random_tensor({3, 4}, rng, -3, 3);
  const std::vector<std::size_t> t{2, 0, 3};
  double expect = 0.0;
  for (std::size_t b = 0; b < 3; ++b) {
    double z = 0.0;
    for (std::size_t c = 0; c < 4; ++c) z += std::exp(logits[b * 4 + c]);
    expect += -(logits[b * 4 + t[b]] - std::log(z));
  }
  EXPECT_NEAR(cross_entropy_logits(logits, t).item(), expect / 3.0, 1e-10);
}

TEST(CrossEntropyTest, SoftTargetsMatchDirectFormula) {
  std::mt19937_64 rng(7);
  Tensor logits = random_tensor({3, 4}, rng, -3, 3);
  Tensor targets = softmax(random_tensor({3, 4}, rng), -1);
  double expect = 0.0;
  for (std::size_t b = 0; b < 3; ++b) {
    double z = 0.0;
    for (std::size_t c = 0; c < 4; ++c) z += std::exp(logits[b * 4 + c]);
    for (std::size_t c = 0; c < 4; ++c) {
      expect -= targets[b * 4 + c] * (logits[b * 4 + c] - std::log(z));
    }
  }
  EXPECT_NEAR(cross_entropy_logits(logits, targets).item(), expect / 3.0, 1e-10);
}

TEST(CrossEntropyTest, OneHotSoftEqualsIndexForm) {
  std::mt19937_64 rng(8);
  Tensor logits = random_tensor({2, 3}, rng);
  const std::vector<std::size_t> t{1, 2};
  Tensor onehot = Tensor::from({2, 3}, {0, 1, 0, 0, 0, 1});
  EXPECT_NEAR(cross_entropy_logits(logits, t).item(), cross_entropy_logits(logits, onehot).item(),
              1e-15);
}

TEST(CrossEntropyTest, TargetOutOfRange) {
  const std::vector<std::size_t> t{2};
  EXPECT_THROW(cross_entropy_logits(Tensor::zeros({1, 2}), t), DomainError);
  const std::vector<std::size_t> too_many{0, 1};
  EXPECT_THROW(cross_entropy_logits(Tensor::zeros({1, 2}), too_many), ShapeError);
}

TEST(ReductionTest, LogSumExpOfZeros) {
  EXPECT_NEAR(log_sum_exp(Tensor::zeros({4}), -1).item(), std::log(4.0), 1e-15);
  EXPECT_NEAR(log_sum_exp(Tensor::from({2}, {1000, 1000}), -1).item(), 1000 + std::numbers::ln2,
              1e-12);
}

TEST(ReductionTest, ConcatShapes) {
  EXPECT_EQ(concat({Tensor::zeros({2, 3}), Tensor::zeros({4, 3})}, 0).shape(), (Shape{6, 3}));
  EXPECT_EQ(concat({Tensor::zeros({2, 3}), Tensor::zeros({2, 1})}, 1).shape(), (Shape{2, 4}));
  EXPECT_THROW(concat({Tensor::zeros({2, 3}), Tensor::zeros({4, 2})}, 0), ShapeError);
  EXPECT_EQ(stack({Tensor::zeros({2, 3}), Tensor::zeros({2, 3})}, 1).shape(), (Shape{2, 2, 3}));
}

TEST(ReductionTest, MeanGradient) {
  std::mt19937_64 rng(9);
  Tensor x = random_tensor({6}, rng);
  EXPECT_LE(max_fd_error([=] { return mean(x); }, {x}), 1e-6);
  Tensor y = random_tensor({3, 4}, rng);
  EXPECT_LE(max_fd_error(weighted([=] { return mean(y, 0); }, rng), {y}), 1e-6);
}

TEST(ReductionTest, SumAndMeanValues) {
  Tensor x = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(values(sum(x, 0)), (std::vector<double>{5, 7, 9}));
  EXPECT_EQ(values(sum(x, 1)), (std::vector<double>{6, 15}));
  EXPECT_EQ(values(mean(x, -1)), (std::vector<double>{2, 5}));
  EXPECT_DOUBLE_EQ(sum(x).item(), 21.0);
}

TEST(BroadcastTest, ScalarAndTrailingVector) {
  Tensor x = Tensor::from({2, 2}, {1, 2, 3, 4});
  EXPECT_EQ(values(add(x, Tensor::scalar(1.0))), (std::vector<double>{2, 3, 4, 5}));
  EXPECT_EQ(values(mul(x, Tensor::from({2}, {10, 100}))),
            (std::vector<double>{10, 200, 30, 400}));
}

TEST(BroadcastTest, AnythingElseIsShapeError) {
  EXPECT_THROW(add(Tensor::zeros({2, 3}), Tensor::zeros({2})), ShapeError);
  EXPECT_THROW(mul(Tensor::zeros({2, 3}), Tensor::zeros({3, 3})), ShapeError);
  EXPECT_THROW(sub(Tensor::zeros({3}), Tensor::zeros({2, 3})), ShapeError);
}

TEST(BroadcastTest, GradientsReduceOverBroadcastAxes) {
  std::mt19937_64 rng(10);
  Tensor x = random_tensor({2, 3, 4}, rng);
  Tensor v = random_tensor({4}, rng);
  Tensor c = random_tensor({}, rng);
  EXPECT_LE(max_fd_error(weighted([=] { return mul(add(x, v), c); }, rng), {x, v, c}), 1e-6);
}

TEST(StructureTest, GatherAndPick) {
  Tensor x = Tensor::from({3, 2}, {1, 2, 3, 4, 5, 6});
  const std::vector<std::size_t> rows{2, 2, 0};
  EXPECT_EQ(values(gather_rows(x, rows)), (std::vector<double>{5, 6, 5, 6, 1, 2}));
  const std::vector<std::size_t> cols{1, 0, 1};
  EXPECT_EQ(values(pick(x, cols)), (std::vector<double>{2, 3, 6}));
  const std::vector<std::size_t> bad{3};
  EXPECT_THROW(gather_rows(x, bad), DomainError);
}

TEST(StructureTest, GatherRepeatedRowsAccumulate) {
  Tensor x = Tensor::from({2, 2}, {1, 2, 3, 4}, true);
  const std::vector<std::size_t> rows{1, 1, 1};
  Tape tape;
  Tape::Scope scope(tape);
  backward(sum(gather_rows(x, rows)));
  EXPECT_EQ(x.grad(), (std::vector<double>{0, 0, 3, 3}));
}

TEST(StructureTest, SliceAndReshape) {
  Tensor x = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(values(slice(x, 1, 1, 3)), (std::vector<double>{2, 3, 5, 6}));
  EXPECT_EQ(reshape(x, {3, 2}).shape(), (Shape{3, 2}));
  EXPECT_THROW(reshape(x, {4, 2}), ShapeError);
}

TEST(StandardizeTest, ConstantRowUsesFloor) {
  Tensor s = standardize(Tensor::full({1, 4}, 3.0), 1e-5);
  for (double v : s.data()) EXPECT_DOUBLE_EQ(v, 0.0);
}

// Every primitive against central differences on inputs drawn from [-2, 2].
TEST(PrimitiveGradientTest, AllUnaryOps) {
  std::mt19937_64 rng(11);
  Tensor x = random_tensor({3, 4}, rng);
  Tensor pos = random_tensor({3, 4}, rng, 0.5, 2.0);
  const std::vector<std::pair<const char*, std::function<Tensor()>>> cases = {
      {"sigmoid", [=] { return sigmoid(x); }},
      {"silu", [=] { return silu(x); }},
      {"exp", [=] { return exp(x); }},
      {"square", [=] { return square(x); }},
      {"neg", [=] { return neg(x); }},
      {"scale", [=] { return scale(x, 0.7); }},
      {"add_scalar", [=] { return add_scalar(x, -1.0); }},
      {"log_softmax", [=] { return log_softmax(x, 0); }},
      {"log_sum_exp", [=] { return log_sum_exp(x, 1); }},
      {"standardize", [=] { return standardize(x, 1e-5); }},
      {"slice", [=] { return slice(x, 1, 1, 3); }},
      {"reshape", [=] { return reshape(x, {2, 6}); }},
  };
  for (const auto& [name, f] : cases) {
    EXPECT_LE(max_fd_error(weighted(f, rng), {x}), 1e-6) << name;
  }
  EXPECT_LE(max_fd_error(weighted([=] { return log(pos); }, rng), {pos}), 1e-6);
  EXPECT_LE(max_fd_error(weighted([=] { return reciprocal(pos); }, rng), {pos}), 1e-6);
}

TEST(PrimitiveGradientTest, BinaryAndStructuralOps) {
  std::mt19937_64 rng(12);
  Tensor a = random_tensor({2, 3, 4}, rng);
  Tensor b = random_tensor({2, 3, 4}, rng);
  Tensor c = random_tensor({2, 4, 3}, rng);
  Tensor w = random_tensor({2, 3}, rng);
  EXPECT_LE(max_fd_error(weighted([=] { return sub(a, b); }, rng), {a, b}), 1e-6);
  EXPECT_LE(max_fd_error(weighted([=] { return mul(a, b); }, rng), {a, b}), 1e-6);
  EXPECT_LE(max_fd_error(weighted([=] { return bmm(a, c); }, rng), {a, c}), 1e-6);
  EXPECT_LE(max_fd_error(weighted([=] { return bmm(a, b, true); }, rng), {a, b}), 1e-6);
  EXPECT_LE(max_fd_error(weighted([=] { return mul_rows(a, w); }, rng), {a, w}), 1e-6);
  EXPECT_LE(max_fd_error(weighted([=] { return concat({a, b}, 2); }, rng), {a, b}), 1e-6);
  const std::vector<std::size_t> rows{1, 0, 1};
  EXPECT_LE(max_fd_error(weighted([=] { return gather_rows(a, rows); }, rng), {a}), 1e-6);
  Tensor m = random_tensor({3, 4}, rng);
  Tensor n = random_tensor({3, 4}, rng);
  EXPECT_LE(max_fd_error(weighted([=] { return stack({m, n}, 0); }, rng), {m, n}), 1e-6);
  EXPECT_LE(max_fd_error(weighted([=] { return pick(m, rows); }, rng), {m}), 1e-6);
  const std::vector<std::size_t> t{3, 0, 2};
  EXPECT_LE(max_fd_error([=] { return cross_entropy_logits(m, t); }, {m}), 1e-6);
}

}  // namespace
}  // namespace mimoe
