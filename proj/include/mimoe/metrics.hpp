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

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>

#include <json.hpp>

#include "mimoe/interaction.hpp"

namespace mimoe {

// Label convention follows the bundle: 1 = fake, 0 = real.
inline constexpr std::size_t kFakeLabel = 1;
inline constexpr std::size_t kRealLabel = 0;

struct ClassScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;  // 0 when precision and recall are both 0
  std::size_t support = 0;
};

/// Fake is the positive class.
struct Confusion {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;
};

struct LossComponents {
  double total = 0.0;
  double task = 0.0;
  double uni = 0.0;
  double interaction = 0.0;
  double classification = 0.0;  // L_d
  double router_z = 0.0;
  double balance = 0.0;
};

struct Metrics {
  std::size_t samples = 0;
  double accuracy = 0.0;
  Confusion confusion;
  ClassScores fake;
  ClassScores real;

  // Routing; all zero for the unimodal ablations.
  std::array<std::size_t, kInteractionClasses> routing{};   // dispatches per expert
  std::array<std::size_t, kInteractionClasses> targets{};   // y_int histogram
  std::array<double, kInteractionClasses> mean_delta{};     // over samples sent to each expert
  std::array<double, kInteractionClasses> mean_rho{};
  /// truth x routed counts over samples with a known generator class.
  std::array<std::array<std::size_t, kInteractionClasses>, kInteractionClasses> truth_routing{};
  std::optional<double> routing_agreement;  // routed == truth
  std::optional<double> target_agreement;   // y_int == truth
  double routed_target_agreement = 0.0;     // routed == y_int

  LossComponents loss;  // batch-size weighted means
};

ClassScores class_scores(std::size_t tp, std::size_t fp, std::size_t fn);

/// Accuracy, confusion and per-class scores; routing fields stay empty.
Metrics classification_metrics(std::span<const std::size_t> predicted,
                               std::span<const std::size_t> labels);

/// Smallest fraction of dispatches received by any expert (0 when empty).
double min_routing_share(const Metrics& m);

nlohmann::json to_json(const Metrics& m);
nlohmann::json to_json(const LossComponents& l);

}  // namespace mimoe
