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
#include <vector>

#include "mimoe/nn.hpp"

namespace mimoe {

struct AdamWOptions {
  double lr = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

/// Adam with bias correction and decoupled weight decay:
///   p <- p * (1 - lr * wd) - lr * m_hat / (sqrt(v_hat) + eps)
class AdamW {
 public:
  AdamW(ParameterList params, const AdamWOptions& options);

  /// One update from the parameters' accumulated gradients.
  void step();
  void zero_grad();

  const ParameterList& parameters() const { return params_; }
  const AdamWOptions& options() const { return options_; }
  std::size_t steps() const { return t_; }

 private:
  ParameterList params_;
  AdamWOptions options_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  std::size_t t_ = 0;
};

/// Throws std::logic_error unless `gate` and `main` are disjoint and together
/// cover `all` exactly once (compared by tensor storage).
void check_partition(const ParameterList& all, const ParameterList& gate,
                     const ParameterList& main);

}  // namespace mimoe
