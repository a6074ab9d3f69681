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

#include "mimoe/interaction.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "mimoe/errors.hpp"
#include "mimoe/ops.hpp"

namespace mimoe {

namespace {

void validate_distribution(std::span<const double> p, const char* name) {
  double total = 0.0;
  for (double v : p) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw DomainError(std::string("js_divergence: ") + name + " has a negative entry");
    }
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-6) {
    throw DomainError(std::string("js_divergence: ") + name + " sums to " +
                      std::to_string(total));
  }
}

// p log(p / m) with 0 log 0 = 0.
double kl_term(double p, double m) { return p > 0.0 ? p * std::log(p / m) : 0.0; }

template <class T>
double cosine(std::span<const T> a, std::span<const T> b) {
  if (a.size() != b.size() || a.empty()) {
    throw ShapeError("semantic_alignment: length mismatch");
  }
  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double x = a[i];
    const double y = b[i];
    dot += x * y;
    na += x * x;
    nb += y * y;
  }
  if (na == 0.0 || nb == 0.0) throw DomainError("semantic_alignment: zero vector");
  const double rho = dot / (std::sqrt(na) * std::sqrt(nb));
  return std::clamp(rho, -1.0, 1.0);
}

}  // namespace

std::string_view interaction_name(int y_int) {
  switch (y_int) {
    case 0: return "DM";
    case 1: return "DA";
    case 2: return "AM";
    case 3: return "AA";
    default: return "unknown";
  }
}

void InteractionThresholds::validate() const {
  if (!(theta_agr > 0.0) || theta_agr > std::numbers::ln2) {
    throw ConfigError("theta_agr must lie in (0, ln 2], got " + std::to_string(theta_agr));
  }
  if (!(theta_sem >= -1.0 && theta_sem <= 1.0)) {
    throw ConfigError("theta_sem must lie in [-1, 1], got " + std::to_string(theta_sem));
  }
}

double js_divergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size() || p.empty()) throw ShapeError("js_divergence: length mismatch");
  validate_distribution(p, "p");
  validate_distribution(q, "q");
  double js = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double m = 0.5 * (p[k] + q[k]);
    js += 0.5 * kl_term(p[k], m) + 0.5 * kl_term(q[k], m);
  }
  return std::clamp(js, 0.0, std::numbers::ln2);
}

double semantic_alignment(std::span<const double> a, std::span<const double> b) {
  return cosine(a, b);
}

double semantic_alignment(std::span<const float> a, std::span<const float> b) {
  return cosine(a, b);
}

int interaction_class(double delta, double rho, const InteractionThresholds& thresholds) {
  const int agreed = delta < thresholds.theta_agr ? 1 : 0;
  const int aligned = rho > thresholds.theta_sem ? 1 : 0;
  return 2 * agreed + aligned;
}

InteractionLabel interaction_label(std::span<const double> p_text,
                                   std::span<const double> p_img,
                                   std::span<const double> m_t, std::span<const double> m_i,
                                   const InteractionThresholds& thresholds) {
  InteractionLabel label;
  label.delta = js_divergence(p_text, p_img);
  label.rho = semantic_alignment(m_t, m_i);
  label.y_int = interaction_class(label.delta, label.rho, thresholds);
  return label;
}

std::vector<std::size_t> argmax_rows(const Tensor& x) {
  if (x.rank() != 2) throw ShapeError("argmax_rows: expects [B, C]");
  const std::size_t cols = x.dim(1);
  std::vector<std::size_t> out(x.dim(0));
  auto v = x.data();
  for (std::size_t b = 0; b < out.size(); ++b) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < cols; ++c) {
      if (v[b * cols + c] > v[b * cols + best]) best = c;
    }
    out[b] = best;
  }
  return out;
}

InteractionGate::InteractionGate(const GateOptions& options, Rng& rng)
    : modality_attention(2 * options.feature_dim + 2 * options.clip_dim, options.hidden,
                         kInteractionClasses, rng),
      gate_net(2 * options.feature_dim + 2 * options.clip_dim, options.hidden,
               kInteractionClasses, rng),
      options_(options) {}

InteractionGate::Output InteractionGate::forward(const Tensor& e_t, const Tensor& e_i,
                                                 const Tensor& m_t, const Tensor& m_i) const {
  if (e_t.rank() != 2 || e_t.shape() != e_i.shape() || m_t.shape() != m_i.shape() ||
      m_t.rank() != 2 || e_t.dim(0) != m_t.dim(0) || e_t.dim(1) != options_.feature_dim ||
      m_t.dim(1) != options_.clip_dim) {
    throw ShapeError("InteractionGate: inputs " + to_string(e_t.shape()) + ", " +
                     to_string(e_i.shape()) + ", " + to_string(m_t.shape()) + ", " +
                     to_string(m_i.shape()));
  }
  const std::size_t batch = e_t.dim(0);
  const std::array<Tensor, 4> slots{e_t, e_i, m_t, m_i};
  Tensor joined = concat(std::span<const Tensor>(slots), 1);
  Tensor weights = sigmoid(modality_attention.forward(joined));  // [B, 4]

  std::vector<Tensor> weighted;
  weighted.reserve(slots.size());
  for (std::size_t s = 0; s < slots.size(); ++s) {
    weighted.push_back(mul_rows(slots[s], reshape(slice(weights, 1, s, s + 1), {batch})));
  }
  Output out;
  out.slot_weights = weights;
  out.logits = gate_net.forward(concat(std::span<const Tensor>(weighted), 1));
  out.dispatch = softmax(out.logits, -1);
  return out;
}

void InteractionGate::collect(ParameterList& out, const std::string& prefix) const {
  modality_attention.collect(out, prefix + ".modality_attention");
  gate_net.collect(out, prefix + ".gate_net");
}

Tensor router_z_loss(const Tensor& logits) {
  if (logits.rank() != 2) throw ShapeError("router_z_loss: expects [B, C]");
  return mean(square(log_sum_exp(logits, -1)));
}

Tensor balance_loss(const Tensor& dispatch, std::span<const std::size_t> routed,
                    BalanceMode mode) {
  if (dispatch.rank() != 2 || dispatch.dim(0) == 0) {
    throw ShapeError("balance_loss: expects nonempty [B, C]");
  }
  const std::size_t batch = dispatch.dim(0);
  const std::size_t experts = dispatch.dim(1);
  Tensor probability = mean(dispatch, 0);  // P_k
  if (mode == BalanceMode::kPaperLiteral) {
    return mean(square(add_scalar(probability, -1.0 / static_cast<double>(experts))));
  }
  if (routed.size() != batch) throw ShapeError("balance_loss: routing length mismatch");
  std::vector<double> fraction(experts, 0.0);
  for (std::size_t k : routed) {
    if (k >= experts) throw DomainError("balance_loss: expert index out of range");
    fraction[k] += 1.0 / static_cast<double>(batch);
  }
  Tensor f = Tensor::from({experts}, std::move(fraction));
  return scale(sum(mul(probability, f)), static_cast<double>(experts));
}

InteractionLossParts interaction_loss(const Tensor& logits, const Tensor& dispatch,
                                      std::span<const std::size_t> y_int,
                                      std::span<const std::size_t> routed,
                                      const InteractionLossOptions& options) {
  InteractionLossParts parts;
  parts.classification = options.supervised ? cross_entropy_logits(logits, y_int)
                                            : Tensor::scalar(0.0);
  parts.router_z = router_z_loss(logits);
  parts.balance = balance_loss(dispatch, routed, options.balance);
  parts.total = add(add(parts.classification, scale(parts.router_z, options.eta)),
                    scale(parts.balance, options.gamma));
  return parts;
}

}  // namespace mimoe
