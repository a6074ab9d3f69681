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

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mimoe/tensor.hpp"

namespace mimoe {

// Differentiable primitives. Every op validates shapes (ShapeError) and
// rejects non-finite results (NumericFault carrying the op name).
//
// Broadcasting is deliberately narrow: the right operand of add/sub/mul may
// be a same-shape tensor, a single-element tensor, or a vector matching the
// trailing dimension. Anything else is a shape error.

/// a[..., k] x b[k, n] -> [..., n]. Leading dims of `a` are flattened into rows.
Tensor matmul(const Tensor& a, const Tensor& b);

/// Batched product a[B, m, k] x b[B, k, n]; with transpose_b, b is [B, n, k].
Tensor bmm(const Tensor& a, const Tensor& b, bool transpose_b = false);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double value);
Tensor neg(const Tensor& a);

/// x[..., d] * w[...]: each trailing row of x scaled by the matching entry of w.
Tensor mul_rows(const Tensor& x, const Tensor& w);

Tensor sigmoid(const Tensor& x);
Tensor silu(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
Tensor square(const Tensor& x);
Tensor reciprocal(const Tensor& x);

/// Sum over one axis (dropped from the result shape).
Tensor sum(const Tensor& x, int axis);
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x, int axis);
Tensor mean(const Tensor& x);

Tensor softmax(const Tensor& x, int axis = -1);
Tensor log_softmax(const Tensor& x, int axis = -1);
Tensor log_sum_exp(const Tensor& x, int axis = -1);

/// (x - mean) / max(std, eps) over the trailing dimension.
Tensor standardize(const Tensor& x, double eps);

Tensor concat(std::span<const Tensor> parts, int axis);
Tensor concat(std::initializer_list<Tensor> parts, int axis);
Tensor stack(std::span<const Tensor> parts, int axis);
Tensor stack(std::initializer_list<Tensor> parts, int axis);
Tensor slice(const Tensor& x, int axis, std::size_t begin, std::size_t end);
Tensor reshape(const Tensor& x, Shape shape);

/// Rows of x (axis 0) selected by index; indices may repeat.
Tensor gather_rows(const Tensor& x, std::span<const std::size_t> index);

/// out[b] = x[b, index[b]] for x[B, C].
Tensor pick(const Tensor& x, std::span<const std::size_t> index);

/// Copy with no gradient connection to `x`.
Tensor detach(const Tensor& x);

/// Mean over the batch of -log softmax(logits)[target]. logits is [B, C].
Tensor cross_entropy_logits(const Tensor& logits,
                            std::span<const std::size_t> targets);
/// Soft-target form: mean over rows of -sum_c t[b, c] log softmax(logits)[b, c].
Tensor cross_entropy_logits(const Tensor& logits, const Tensor& targets);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator*(const Tensor& a, double c) { return scale(a, c); }
inline Tensor operator*(double c, const Tensor& a) { return scale(a, c); }

}  // namespace mimoe
