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
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mimoe/bundle.hpp"
#include "mimoe/imoe.hpp"
#include "mimoe/interaction.hpp"
#include "mimoe/nn.hpp"
#include "mimoe/tensor.hpp"

namespace mimoe {

inline constexpr std::size_t kFusionExperts = 4;

struct ModelConfig {
  std::size_t text_tokens = 8;  // informational; any N_t >= 1 is accepted
  std::size_t text_dim = 32;    // d_t_raw
  std::size_t image_tokens = 8;
  std::size_t image_dim = 32;   // d_i_raw
  std::size_t clip_raw_dim = 16;
  std::size_t dim = 32;         // d
  std::size_t clip_dim = 16;    // d_c; proj_clip is the identity when equal to clip_raw_dim
  std::size_t hidden = 64;
  std::size_t experts = 2;      // per iMoE block
  std::size_t heads = 4;
  std::size_t ff_ratio = 4;
  std::uint64_t seed = 2024;

  void validate() const;
};

/// Ablation variants.
enum class Ablation {
  kFull,
  kTextOnly,   // text refinement + final head only
  kImageOnly,  // image refinement + final head only
  kNoReg,      // eta = gamma = 0
  kNoSem,      // routing target drops the alignment bit
  kNoAgr,      // routing target drops the agreement bit
  kNoInt,      // no interaction supervision; regularizers only
};
std::string_view to_string(Ablation a);
Ablation parse_ablation(std::string_view name);

struct LossConfig {
  double alpha = 0.5;
  double beta = 0.3;
  double eta = 0.01;
  double gamma = 0.1;
  InteractionThresholds thresholds;
  BalanceMode balance = BalanceMode::kStMoe;
  bool detach_unimodal = false;
  Ablation ablation = Ablation::kFull;
};

/// One batch as tensors. text is [B, N_t, d_t_raw], image [B, N_i, d_i_raw],
/// clip_* [B, d_c_raw].
struct Batch {
  Tensor text;
  Tensor image;
  Tensor clip_text;
  Tensor clip_image;
  std::vector<std::size_t> labels;
  std::vector<int> truth;  // generator interaction class, -1 when unknown

  std::size_t size() const { return labels.size(); }
};

Batch make_batch(const BundleHeader& header, std::span<const EmbeddingRecord> records,
                 std::span<const std::size_t> indices);
Batch make_batch(const BundleHeader& header, std::span<const EmbeddingRecord> records);

struct Refined {
  Tensor e_t;  // [B, d]
  Tensor e_i;
  Tensor e_m;
};

struct UnimodalOutput {
  Tensor logits_text;  // [B, 2]
  Tensor logits_image;
  Tensor p_text;       // softmax of the logits
  Tensor p_image;
};

struct ForwardOutput {
  Tensor logits;  // [B, 2]
  Tensor p_text;
  Tensor p_image;
  Tensor dispatch;                  // [B, 4]
  std::vector<std::size_t> routed;  // argmax of dispatch
  std::vector<InteractionLabel> labels;
  std::vector<std::size_t> targets;  // routing targets actually used for L_d

  Tensor task;
  Tensor uni;
  Tensor interaction;
  Tensor total;
  InteractionLossParts interaction_parts;
};

class MimoeModel {
 public:
  explicit MimoeModel(const ModelConfig& config);

  const ModelConfig& config() const { return config_; }

  /// u_t [B, N_t, d_t_raw], u_i [B, N_i, d_i_raw] -> pooled e_t, e_i, e_m.
  Refined refine(const Tensor& u_t, const Tensor& u_i) const;
  Tensor refine_text_only(const Tensor& u_t) const;
  Tensor refine_image_only(const Tensor& u_i) const;

  UnimodalOutput unimodal_predict(const Tensor& e_t, const Tensor& e_i) const;

  /// Alignment vectors as seen by the gate (proj_clip applied when present).
  Tensor project_clip(const Tensor& clip) const;

  /// Hard top-1 fusion: each sample goes through fusion expert routed[b] only,
  /// scaled by dispatch[b, routed[b]], then head_final.
  Tensor fuse_and_classify(const Refined& refined, std::span<const std::size_t> routed,
                           const Tensor& dispatch) const;

  ForwardOutput forward_loss(const Batch& batch, const LossConfig& loss) const;

  ParameterList parameters() const;
  ParameterList gate_parameters() const;
  ParameterList main_parameters() const;

  Linear proj_text;
  Linear proj_img;
  std::optional<Linear> proj_clip;
  IMoeBlock refine_text;
  IMoeBlock refine_img;
  IMoeBlock refine_multi;
  Mlp head_text;
  Mlp head_img;
  AdaptiveNorm norm_text;
  AdaptiveNorm norm_img;
  InteractionGate gate;
  std::array<IMoeBlock, kFusionExperts> fusion;
  Mlp head_final;

 private:
  ModelConfig config_;
};

}  // namespace mimoe
