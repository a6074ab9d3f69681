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

#include "mimoe/imoe.hpp"

#include "mimoe/errors.hpp"
#include "mimoe/ops.hpp"

namespace mimoe {

Tensor weighted_pool(const Tensor& y, const Tensor& weights, double eps) {
  Tensor numerator = sum(mul_rows(y, weights), 1);          // [B, d]
  Tensor denominator = add_scalar(sum(weights, 1), eps);    // [B]
  return mul_rows(numerator, reciprocal(denominator));
}

IMoeBlock::IMoeBlock(const IMoeOptions& options, Rng& rng)
    : attention_net(options.dim, options.hidden, 1, rng),
      gate_net(options.dim, options.hidden, options.experts, rng),
      options_(options) {
  if (options.experts == 0) throw ShapeError("IMoeBlock: needs at least one expert");
  if (options.transformer.dim != options.dim) {
    throw ShapeError("IMoeBlock: transformer dim differs from block dim");
  }
  experts_.reserve(options.experts);
  for (std::size_t i = 0; i < options.experts; ++i) {
    experts_.emplace_back(options.transformer, rng);
  }
}

IMoeBlock::Squeeze IMoeBlock::attention_squeeze(const Tensor& x) const {
  if (x.rank() == 2) {
    Squeeze s = attention_squeeze(reshape(x, {1, x.dim(0), x.dim(1)}));
    return {reshape(s.attention, {x.dim(0)}), reshape(s.pooled, {x.dim(1)})};
  }
  if (x.rank() != 3 || x.dim(2) != options_.dim) {
    throw ShapeError("IMoeBlock: input " + to_string(x.shape()) + " expects [B, N, " +
                     std::to_string(options_.dim) + "]");
  }
  const std::size_t batch = x.dim(0);
  const std::size_t tokens = x.dim(1);
  Tensor scores = attention_net.forward(x);  // [B, N, 1]
  Tensor att = sigmoid(reshape(scores, {batch, tokens}));
  return {att, weighted_pool(x, att, kPoolEps)};
}

IMoeBlock::Output IMoeBlock::forward(const Tensor& x,
                                     const std::optional<Tensor>& gate_override) const {
  if (x.rank() == 2) {
    std::optional<Tensor> lifted;
    if (gate_override) lifted = reshape(*gate_override, {1, experts()});
    Output out = forward(reshape(x, {1, x.dim(0), x.dim(1)}), lifted);
    Output single;
    single.o = reshape(out.o, {options_.dim});
    single.gate = reshape(out.gate, {experts()});
    single.attention = reshape(out.attention, {x.dim(0)});
    for (const Tensor& p : out.expert_pooled) {
      single.expert_pooled.push_back(reshape(p, {options_.dim}));
    }
    return single;
  }
  Squeeze squeeze = attention_squeeze(x);
  const std::size_t batch = x.dim(0);

  Output out;
  out.attention = squeeze.attention;
  if (gate_override) {
    if (gate_override->shape() != Shape{batch, experts()}) {
      throw ShapeError("IMoeBlock: gate override " + to_string(gate_override->shape()));
    }
    out.gate = *gate_override;
  } else {
    out.gate = softmax(gate_net.forward(squeeze.pooled), -1);
  }

  Tensor combined;
  for (std::size_t i = 0; i < experts_.size(); ++i) {
    Tensor pooled = weighted_pool(experts_[i].forward(x), squeeze.attention, kPoolEps);
    Tensor weight = reshape(slice(out.gate, 1, i, i + 1), {batch});
    Tensor term = mul_rows(pooled, weight);
    combined = (i == 0) ? term : add(combined, term);
    out.expert_pooled.push_back(std::move(pooled));
  }
  out.o = combined;
  return out;
}

void IMoeBlock::collect(ParameterList& out, const std::string& prefix) const {
  attention_net.collect(out, prefix + ".attention");
  gate_net.collect(out, prefix + ".gate");
  for (std::size_t i = 0; i < experts_.size(); ++i) {
    experts_[i].collect(out, prefix + ".expert" + std::to_string(i));
  }
}

}  // namespace mimoe
