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
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mimoe/tensor.hpp"

namespace mimoe {

struct GradCheckOptions {
  double step = 1e-5;        // central difference half-width
  double tolerance = 1e-6;   // on the relative error below
  double floor = 1e-3;       // rel = |a - n| / max(|a|, |n|, floor)
  std::size_t max_entries = 0;  // per input tensor; 0 checks every entry
  std::uint64_t seed = 7;       // picks entries when max_entries > 0
};

struct GradCheckResult {
  std::string name;
  std::size_t checked = 0;
  std::size_t skipped = 0;  // entries whose perturbation changed a discrete decision
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  double tolerance = 0.0;

  bool passed() const { return checked > 0 && max_rel_error <= tolerance; }
};

/// Compares reverse-mode gradients of `loss` with respect to every entry of
/// `inputs` against central differences. `loss` must be deterministic and
/// return a single-element tensor. When `decisions` is given, entries whose
/// +/- perturbation changes its value (e.g. a hard routing choice) are
/// skipped instead of compared.
GradCheckResult check_gradients(const std::string& name, const std::function<Tensor()>& loss,
                                std::span<Tensor> inputs, const GradCheckOptions& options,
                                const std::function<std::vector<std::size_t>()>& decisions = {});

struct GradientSuiteOptions {
  double primitive_tolerance = 1e-6;
  double composite_tolerance = 1e-4;
  std::uint64_t seed = 11;
};

/// Every tensor primitive, every layer, the gate and losses, and the full
/// model at d = 8. Primitive checks use primitive_tolerance, the rest
/// composite_tolerance.
std::vector<GradCheckResult> gradient_suite(const GradientSuiteOptions& options = {});

}  // namespace mimoe
