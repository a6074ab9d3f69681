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
#include <optional>
#include <string>
#include <vector>

#include "mimoe/nn.hpp"
#include "mimoe/tensor.hpp"

namespace mimoe {

struct IMoeOptions {
  std::size_t dim = 32;
  std::size_t hidden = 64;
  std::size_t experts = 2;
  TransformerOptions transformer;
};

/// Mixture-of-experts block that pools a token sequence into one vector.
///
///   att   = sigmoid(attention_net(x))                  one score per token
///   pool  = sum_j att_j y_j / (sum_j att_j + 1e-8)     for any sequence y
///   gate  = softmax(gate_net(pool(x)))
///   o     = sum_i gate_i * pool(E_i(x))
///
/// All experts run densely; the attention weights are shared by every pool.
class IMoeBlock {
 public:
  struct Squeeze {
    Tensor attention;  // [B, N]
    Tensor pooled;     // [B, d]
  };

  struct Output {
    Tensor o;          // [B, d]
    Tensor gate;       // [B, n_e]
    Tensor attention;  // [B, N]
    std::vector<Tensor> expert_pooled;  // n_e x [B, d]
  };

  static constexpr double kPoolEps = 1e-8;

  IMoeBlock() = default;
  IMoeBlock(const IMoeOptions& options, Rng& rng);

  /// x is [B, N, d] (or [N, d] for a single sequence; outputs then drop B).
  Squeeze attention_squeeze(const Tensor& x) const;

  /// Full block. `gate_override` ([B, n_e]) replaces the learned gate.
  Output forward(const Tensor& x, const std::optional<Tensor>& gate_override = {}) const;

  void collect(ParameterList& out, const std::string& prefix) const;

  std::size_t experts() const { return experts_.size(); }
  std::size_t dim() const { return options_.dim; }

  Mlp attention_net;  // d -> hidden -> 1
  Mlp gate_net;       // d -> hidden -> n_e

  const std::vector<TransformerBlock>& expert_blocks() const { return experts_; }

 private:
  IMoeOptions options_;
  std::vector<TransformerBlock> experts_;
};

/// Weighted token mean: sum_j w_j y_j / (sum_j w_j + eps) for y [B, N, d], w [B, N].
Tensor weighted_pool(const Tensor& y, const Tensor& weights, double eps);

}  // namespace mimoe
