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
#include <random>
#include <string>
#include <vector>

#include "mimoe/tensor.hpp"

namespace mimoe {

using Rng = std::mt19937_64;

struct NamedParameter {
  std::string name;
  Tensor tensor;
};
using ParameterList = std::vector<NamedParameter>;

inline constexpr double kNormEps = 1e-5;

/// Weight of shape [fan_in, fan_out] drawn from U(-s, s), s = sqrt(6 / (fan_in + fan_out)).
Tensor xavier_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng);

class Linear {
 public:
  Linear() = default;
  Linear(std::size_t in, std::size_t out, Rng& rng);

  Tensor forward(const Tensor& x) const;
  void collect(ParameterList& out, const std::string& prefix) const;

  std::size_t in_features() const { return weight.dim(0); }
  std::size_t out_features() const { return weight.dim(1); }

  Tensor weight;  // [in, out]
  Tensor bias;    // [out]
};

/// Two linear layers with SiLU in between; no output activation.
class Mlp {
 public:
  Mlp() = default;
  Mlp(std::size_t in, std::size_t hidden, std::size_t out, Rng& rng);

  Tensor forward(const Tensor& x) const;
  void collect(ParameterList& out, const std::string& prefix) const;

  std::size_t in_features() const { return fc1.in_features(); }
  std::size_t out_features() const { return fc2.out_features(); }

  Linear fc1;
  Linear fc2;
};

/// Learnable affine restandardization over the trailing dimension:
/// gain * (x - mean) / max(std, eps) + shift.
class AdaptiveNorm {
 public:
  AdaptiveNorm() = default;
  explicit AdaptiveNorm(std::size_t dim);

  Tensor forward(const Tensor& x) const;
  void collect(ParameterList& out, const std::string& prefix) const;

  Tensor gain;
  Tensor shift;
};

struct TransformerOptions {
  std::size_t dim = 32;
  std::size_t heads = 4;
  std::size_t ff_ratio = 4;
};

/// Single pre-norm ViT encoder block without positional encoding:
///   h = x + Attn(LN1(x)),  y = h + FF(LN2(h)).
class TransformerBlock {
 public:
  TransformerBlock() = default;
  TransformerBlock(const TransformerOptions& options, Rng& rng);

  /// x is [B, N, d]. When `attention` is non-null it receives the
  /// post-softmax attention weights, one [B, N, N] tensor per head.
  Tensor forward(const Tensor& x, std::vector<Tensor>* attention = nullptr) const;
  void collect(ParameterList& out, const std::string& prefix) const;

  std::size_t dim() const { return options_.dim; }
  std::size_t heads() const { return options_.heads; }

  AdaptiveNorm norm1;
  Linear qkv;   // d -> 3d
  Linear proj;  // d -> d
  AdaptiveNorm norm2;
  Mlp ff;

 private:
  TransformerOptions options_;
};

}  // namespace mimoe
