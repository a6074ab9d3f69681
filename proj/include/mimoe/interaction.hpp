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
#include <span>
#include <string_view>
#include <vector>

#include "mimoe/nn.hpp"
#include "mimoe/tensor.hpp"

namespace mimoe {

/// Interaction classes, indexed as 2 * agreed + aligned.
enum class Interaction : int {
  kDisagreedMisaligned = 0,  // DM
  kDisagreedAligned = 1,     // DA
  kAgreedMisaligned = 2,     // AM
  kAgreedAligned = 3,        // AA
};
inline constexpr std::size_t kInteractionClasses = 4;
std::string_view interaction_name(int y_int);

struct InteractionThresholds {
  double theta_agr = 0.1;  // JS divergence, natural log
  double theta_sem = 0.2;  // cosine similarity

  /// theta_agr in (0, ln 2] and theta_sem in [-1, 1], else ConfigError.
  void validate() const;
};

struct InteractionLabel {
  int y_int = 0;
  double delta = 0.0;
  double rho = 0.0;
};

/// Jensen-Shannon divergence (natural log) of two distributions of equal
/// length. Inputs must be nonnegative and sum to 1 within 1e-6.
double js_divergence(std::span<const double> p, std::span<const double> q);

/// Cosine similarity; DomainError when either vector is zero.
double semantic_alignment(std::span<const double> a, std::span<const double> b);
double semantic_alignment(std::span<const float> a, std::span<const float> b);

int interaction_class(double delta, double rho, const InteractionThresholds& thresholds);

InteractionLabel interaction_label(std::span<const double> p_text,
                                   std::span<const double> p_img,
                                   std::span<const double> m_t, std::span<const double> m_i,
                                   const InteractionThresholds& thresholds);

/// Lowest index of the row maximum, per row of a [B, C] tensor.
std::vector<std::size_t> argmax_rows(const Tensor& x);

struct GateOptions {
  std::size_t feature_dim = 32;  // e_t, e_i
  std::size_t clip_dim = 16;     // m_t, m_i
  std::size_t hidden = 64;
};

/// Routes samples to fusion experts from (e_t, e_i, m_t, m_i).
///
/// A modality-attention MLP scores the four slots (sigmoid weight each); the
/// weighted slots are concatenated and mapped by gate_net to four logits.
class InteractionGate {
 public:
  struct Output {
    Tensor dispatch;      // softmax(logits), [B, 4]
    Tensor logits;        // o_d, [B, 4]
    Tensor slot_weights;  // [B, 4]
  };

  InteractionGate() = default;
  InteractionGate(const GateOptions& options, Rng& rng);

  Output forward(const Tensor& e_t, const Tensor& e_i, const Tensor& m_t,
                 const Tensor& m_i) const;
  void collect(ParameterList& out, const std::string& prefix) const;

  Mlp modality_attention;  // (2d + 2d_c) -> hidden -> 4
  Mlp gate_net;            // (2d + 2d_c) -> hidden -> 4

 private:
  GateOptions options_;
};

/// Mean over the batch of (log sum_k exp(o_d[b, k]))^2.
Tensor router_z_loss(const Tensor& logits);

enum class BalanceMode { kStMoe, kPaperLiteral };

/// kStMoe: n * sum_k f_k P_k, f_k = fraction routed to k (constant), P_k =
/// batch-mean dispatch probability. kPaperLiteral: mean_k (P_k - 1/n)^2.
Tensor balance_loss(const Tensor& dispatch, std::span<const std::size_t> routed,
                    BalanceMode mode);

struct InteractionLossParts {
  Tensor total;
  Tensor classification;  // L_d
  Tensor router_z;        // L_z
  Tensor balance;         // L_b
};

struct InteractionLossOptions {
  double eta = 0.01;
  double gamma = 0.1;
  BalanceMode balance = BalanceMode::kStMoe;
  bool supervised = true;  // include L_d
};

/// L_int = L_d + eta * L_z + gamma * L_b, with L_d = CE(logits, y_int).
InteractionLossParts interaction_loss(const Tensor& logits, const Tensor& dispatch,
                                      std::span<const std::size_t> y_int,
                                      std::span<const std::size_t> routed,
                                      const InteractionLossOptions& options);

}  // namespace mimoe
