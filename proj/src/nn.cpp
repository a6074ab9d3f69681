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

#include "mimoe/nn.hpp"

#include <cmath>

#include "mimoe/errors.hpp"
#include "mimoe/ops.hpp"

namespace mimoe {

Tensor xavier_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double s = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-s, s);
  std::vector<double> w(fan_in * fan_out);
  for (double& v : w) v = dist(rng);
  return Tensor::from({fan_in, fan_out}, std::move(w), true);
}

Linear::Linear(std::size_t in, std::size_t out, Rng& rng)
    : weight(xavier_uniform(in, out, rng)), bias(Tensor::zeros({out}, true)) {}

Tensor Linear::forward(const Tensor& x) const { return add(matmul(x, weight), bias); }

void Linear::collect(ParameterList& out, const std::string& prefix) const {
  out.push_back({prefix + ".weight", weight});
  out.push_back({prefix + ".bias", bias});
}

Mlp::Mlp(std::size_t in, std::size_t hidden, std::size_t out, Rng& rng)
    : fc1(in, hidden, rng), fc2(hidden, out, rng) {}

Tensor Mlp::forward(const Tensor& x) const {
  if (x.rank() < 1 || x.shape().back() != in_features()) {
    throw ShapeError("Mlp: input " + to_string(x.shape()) + " expects trailing dim " +
                     std::to_string(in_features()));
  }
  return fc2.forward(silu(fc1.forward(x)));
}

void Mlp::collect(ParameterList& out, const std::string& prefix) const {
  fc1.collect(out, prefix + ".fc1");
  fc2.collect(out, prefix + ".fc2");
}

AdaptiveNorm::AdaptiveNorm(std::size_t dim)
    : gain(Tensor::full({dim}, 1.0, true)), shift(Tensor::zeros({dim}, true)) {}

Tensor AdaptiveNorm::forward(const Tensor& x) const {
  if (x.rank() < 1 || x.shape().back() != gain.size()) {
    throw ShapeError("AdaptiveNorm: input " + to_string(x.shape()) + " expects trailing dim " +
                     std::to_string(gain.size()));
  }
  return add(mul(standardize(x, kNormEps), gain), shift);
}

void AdaptiveNorm::collect(ParameterList& out, const std::string& prefix) const {
  out.push_back({prefix + ".gain", gain});
  out.push_back({prefix + ".shift", shift});
}

TransformerBlock::TransformerBlock(const TransformerOptions& options, Rng& rng)
    : norm1(options.dim),
      qkv(options.dim, 3 * options.dim, rng),
      proj(options.dim, options.dim, rng),
      norm2(options.dim),
      ff(options.dim, options.ff_ratio * options.dim, options.dim, rng),
      options_(options) {
  if (options.heads == 0 || options.dim % options.heads != 0) {
    throw ShapeError("TransformerBlock: dim " + std::to_string(options.dim) +
                     " not divisible by " + std::to_string(options.heads) + " heads");
  }
}

Tensor TransformerBlock::forward(const Tensor& x, std::vector<Tensor>* attention) const {
  if (x.rank() == 2) {
    Tensor y = forward(reshape(x, {1, x.dim(0), x.dim(1)}), attention);
    return reshape(y, x.shape());
  }
  const std::size_t d = options_.dim;
  if (x.rank() != 3 || x.dim(2) != d) {
    throw ShapeError("TransformerBlock: input " + to_string(x.shape()) + " expects [B, N, " +
                     std::to_string(d) + "]");
  }
  const std::size_t head_dim = d / options_.heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_dim));

  Tensor packed = qkv.forward(norm1.forward(x));  // [B, N, 3d]
  std::vector<Tensor> heads;
  heads.reserve(options_.heads);
  for (std::size_t h = 0; h < options_.heads; ++h) {
    Tensor q = slice(packed, 2, h * head_dim, (h + 1) * head_dim);
    Tensor k = slice(packed, 2, d + h * head_dim, d + (h + 1) * head_dim);
    Tensor v = slice(packed, 2, 2 * d + h * head_dim, 2 * d + (h + 1) * head_dim);
    Tensor weights = softmax(scale(bmm(q, k, /*transpose_b=*/true), inv_sqrt), -1);
    if (attention != nullptr) attention->push_back(weights);
    heads.push_back(bmm(weights, v));
  }
  Tensor h = add(x, proj.forward(concat(std::span<const Tensor>(heads), 2)));
  return add(h, ff.forward(norm2.forward(h)));
}

void TransformerBlock::collect(ParameterList& out, const std::string& prefix) const {
  norm1.collect(out, prefix + ".norm1");
  qkv.collect(out, prefix + ".qkv");
  proj.collect(out, prefix + ".proj");
  norm2.collect(out, prefix + ".norm2");
  ff.collect(out, prefix + ".ff");
}

}  // namespace mimoe
