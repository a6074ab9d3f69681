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
#include <set>
#include <stdexcept>

#include "mimoe/errors.hpp"

namespace mimoe {

AdamW::AdamW(ParameterList params, const AdamWOptions& options)
    : params_(std::move(params)), options_(options) {
  if (!(options.lr >= 0.0) || !(options.weight_decay >= 0.0)) {
    throw ConfigError("learning rate and weight decay must be nonnegative");
  }
  for (const NamedParameter& p : params_) {
    m_.emplace_back(p.tensor.size(), 0.0);
    v_.emplace_back(p.tensor.size(), 0.0);
  }
}

void AdamW::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(options_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(options_.beta2, static_cast<double>(t_));
  const double decay = 1.0 - options_.lr * options_.weight_decay;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = params_[i].tensor;
    const auto& grad = p.impl()->grad;
    auto values = p.mutable_data();
    if (!grad.empty() && grad.size() != values.size()) {
      throw ShapeError("AdamW: gradient shape mismatch for " + params_[i].name);
    }
    std::vector<double>& m = m_[i];
    std::vector<double>& v = v_[i];
    for (std::size_t j = 0; j < values.size(); ++j) {
      const double g = grad.empty() ? 0.0 : grad[j];
      m[j] = options_.beta1 * m[j] + (1.0 - options_.beta1) * g;
      v[j] = options_.beta2 * v[j] + (1.0 - options_.beta2) * g * g;
      const double m_hat = m[j] / bc1;
      const double v_hat = v[j] / bc2;
      values[j] = values[j] * decay - options_.lr * m_hat / (std::sqrt(v_hat) + options_.eps);
    }
  }
}

void AdamW::zero_grad() {
  for (NamedParameter& p : params_) p.tensor.zero_grad();
}

void check_partition(const ParameterList& all, const ParameterList& gate,
                     const ParameterList& main) {
  std::set<const TensorImpl*> gate_set;
  std::set<const TensorImpl*> main_set;
  for (const auto& p : gate) gate_set.insert(p.tensor.impl().get());
  for (const auto& p : main) {
    if (gate_set.count(p.tensor.impl().get())) {
      throw std::logic_error("parameter " + p.name + " appears in both optimizer partitions");
    }
    main_set.insert(p.tensor.impl().get());
  }
  std::set<const TensorImpl*> all_set;
  for (const auto& p : all) {
    const TensorImpl* key = p.tensor.impl().get();
    if (!all_set.insert(key).second) {
      throw std::logic_error("parameter " + p.name + " registered twice");
    }
    if (!gate_set.count(key) && !main_set.count(key)) {
      throw std::logic_error("parameter " + p.name + " belongs to no optimizer partition");
    }
  }
  if (all_set.size() != gate_set.size() + main_set.size()) {
    throw std::logic_error("optimizer partitions reference unknown parameters");
  }
}

}  // namespace mimoe
