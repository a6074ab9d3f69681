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

#include "mimoe/model.hpp"

#include <algorithm>
#include <string>

#include "mimoe/errors.hpp"
#include "mimoe/ops.hpp"

namespace mimoe {

namespace {

IMoeOptions block_options(const ModelConfig& c) {
  IMoeOptions o;
  o.dim = c.dim;
  o.hidden = c.hidden;
  o.experts = c.experts;
  o.transformer.dim = c.dim;
  o.transformer.heads = c.heads;
  o.transformer.ff_ratio = c.ff_ratio;
  return o;
}

Tensor tokens_tensor(std::span<const EmbeddingRecord> records,
                     std::span<const std::size_t> indices, std::size_t tokens, std::size_t dim,
                     std::vector<float> EmbeddingRecord::*field) {
  std::vector<double> values;
  values.reserve(indices.size() * tokens * dim);
  for (std::size_t i : indices) {
    const std::vector<float>& src = records[i].*field;
    values.insert(values.end(), src.begin(), src.end());
  }
  return Tensor::from({indices.size(), tokens, dim}, std::move(values));
}

Tensor rows_tensor(std::span<const EmbeddingRecord> records,
                   std::span<const std::size_t> indices, std::size_t dim,
                   std::vector<float> EmbeddingRecord::*field) {
  std::vector<double> values;
  values.reserve(indices.size() * dim);
  for (std::size_t i : indices) {
    const std::vector<float>& src = records[i].*field;
    values.insert(values.end(), src.begin(), src.end());
  }
  return Tensor::from({indices.size(), dim}, std::move(values));
}

std::span<const double> row(const Tensor& t, std::size_t b) {
  const std::size_t width = t.dim(1);
  return t.data().subspan(b * width, width);
}

}  // namespace

void ModelConfig::validate() const {
  if (text_dim == 0 || image_dim == 0 || clip_raw_dim == 0 || dim == 0 || clip_dim == 0 ||
      hidden == 0 || experts == 0 || heads == 0 || ff_ratio == 0) {
    throw ConfigError("model dimensions must be >= 1");
  }
  if (dim % heads != 0) {
    throw ConfigError("model dim " + std::to_string(dim) + " is not divisible by " +
                      std::to_string(heads) + " heads");
  }
}

std::string_view to_string(Ablation a) {
  switch (a) {
    case Ablation::kFull: return "full";
    case Ablation::kTextOnly: return "text_only";
    case Ablation::kImageOnly: return "image_only";
    case Ablation::kNoReg: return "no_reg";
    case Ablation::kNoSem: return "no_sem";
    case Ablation::kNoAgr: return "no_agr";
    case Ablation::kNoInt: return "no_int";
  }
  return "full";
}

Ablation parse_ablation(std::string_view name) {
  for (Ablation a : {Ablation::kFull, Ablation::kTextOnly, Ablation::kImageOnly,
                     Ablation::kNoReg, Ablation::kNoSem, Ablation::kNoAgr, Ablation::kNoInt}) {
    if (to_string(a) == name) return a;
  }
  throw ConfigError("unknown ablation '" + std::string(name) + "'");
}

Batch make_batch(const BundleHeader& header, std::span<const EmbeddingRecord> records,
                 std::span<const std::size_t> indices) {
  if (indices.empty()) throw DomainError("make_batch: empty batch");
  Batch batch;
  batch.text = tokens_tensor(records, indices, header.text_tokens, header.text_dim,
                             &EmbeddingRecord::text);
  batch.image = tokens_tensor(records, indices, header.image_tokens, header.image_dim,
                              &EmbeddingRecord::image);
  batch.clip_text = rows_tensor(records, indices, header.clip_dim, &EmbeddingRecord::clip_text);
  batch.clip_image = rows_tensor(records, indices, header.clip_dim, &EmbeddingRecord::clip_image);
  for (std::size_t i : indices) {
    batch.labels.push_back(records[i].label);
    const int truth = records[i].interaction_truth;
    batch.truth.push_back(truth <= 3 ? truth : -1);
  }
  return batch;
}

Batch make_batch(const BundleHeader& header, std::span<const EmbeddingRecord> records) {
  std::vector<std::size_t> all(records.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return make_batch(header, records, all);
}

MimoeModel::MimoeModel(const ModelConfig& config) : config_(config) {
  config.validate();
  Rng rng(config.seed);
  const IMoeOptions block = block_options(config);
  proj_text = Linear(config.text_dim, config.dim, rng);
  proj_img = Linear(config.image_dim, config.dim, rng);
  if (config.clip_dim != config.clip_raw_dim) {
    proj_clip = Linear(config.clip_raw_dim, config.clip_dim, rng);
  }
  refine_text = IMoeBlock(block, rng);
  refine_img = IMoeBlock(block, rng);
  refine_multi = IMoeBlock(block, rng);
  head_text = Mlp(config.dim, config.hidden, 2, rng);
  head_img = Mlp(config.dim, config.hidden, 2, rng);
  norm_text = AdaptiveNorm(config.dim);
  norm_img = AdaptiveNorm(config.dim);
  gate = InteractionGate({config.dim, config.clip_dim, config.hidden}, rng);
  for (IMoeBlock& expert : fusion) expert = IMoeBlock(block, rng);
  head_final = Mlp(config.dim, config.hidden, 2, rng);
}

Tensor MimoeModel::refine_text_only(const Tensor& u_t) const {
  return refine_text.forward(proj_text.forward(u_t)).o;
}

Tensor MimoeModel::refine_image_only(const Tensor& u_i) const {
  return refine_img.forward(proj_img.forward(u_i)).o;
}

Refined MimoeModel::refine(const Tensor& u_t, const Tensor& u_i) const {
  if (u_t.rank() != 3 || u_i.rank() != 3 || u_t.dim(0) != u_i.dim(0) ||
      u_t.dim(2) != config_.text_dim || u_i.dim(2) != config_.image_dim) {
    throw ShapeError("refine: text " + to_string(u_t.shape()) + ", image " +
                     to_string(u_i.shape()));
  }
  Tensor x_t = proj_text.forward(u_t);
  Tensor x_i = proj_img.forward(u_i);
  Tensor x_m = concat({x_t, x_i}, 1);  // u_m: token-axis concatenation
  Refined r;
  r.e_t = refine_text.forward(x_t).o;
  r.e_i = refine_img.forward(x_i).o;
  r.e_m = refine_multi.forward(x_m).o;
  return r;
}

UnimodalOutput MimoeModel::unimodal_predict(const Tensor& e_t, const Tensor& e_i) const {
  UnimodalOutput u;
  u.logits_text = head_text.forward(e_t);
  u.logits_image = head_img.forward(e_i);
  u.p_text = softmax(u.logits_text, -1);
  u.p_image = softmax(u.logits_image, -1);
  return u;
}

Tensor MimoeModel::project_clip(const Tensor& clip) const {
  return proj_clip ? proj_clip->forward(clip) : clip;
}

Tensor MimoeModel::fuse_and_classify(const Refined& refined, std::span<const std::size_t> routed,
                                     const Tensor& dispatch) const {
  const std::size_t batch = refined.e_t.dim(0);
  if (routed.size() != batch || dispatch.shape() != Shape{batch, kFusionExperts}) {
    throw ShapeError("fuse_and_classify: routing does not match batch");
  }
  std::array<std::vector<std::size_t>, kFusionExperts> groups;
  for (std::size_t b = 0; b < batch; ++b) {
    if (routed[b] >= kFusionExperts) {
      throw DomainError("fuse_and_classify: dispatch index " + std::to_string(routed[b]) +
                        " out of range");
    }
    groups[routed[b]].push_back(b);
  }

  Tensor tokens = stack({norm_text.forward(refined.e_t), refined.e_m,
                         norm_img.forward(refined.e_i)},
                        1);  // [B, 3, d]

  std::vector<Tensor> parts;
  std::vector<std::size_t> order;
  for (std::size_t k = 0; k < kFusionExperts; ++k) {
    if (groups[k].empty()) continue;
    Tensor selected = groups[k].size() == batch ? tokens : gather_rows(tokens, groups[k]);
    parts.push_back(fusion[k].forward(selected).o);
    order.insert(order.end(), groups[k].begin(), groups[k].end());
  }
  Tensor fused;
  if (parts.size() == 1) {
    fused = parts.front();
  } else {
    std::vector<std::size_t> inverse(batch);
    for (std::size_t j = 0; j < order.size(); ++j) inverse[order[j]] = j;
    fused = gather_rows(concat(std::span<const Tensor>(parts), 0), inverse);
  }
  fused = mul_rows(fused, pick(dispatch, routed));
  return head_final.forward(fused);
}

ForwardOutput MimoeModel::forward_loss(const Batch& batch, const LossConfig& loss) const {
  if (batch.size() == 0) throw DomainError("forward_loss: empty batch");
  ForwardOutput out;
  const Tensor zero = Tensor::scalar(0.0);

  if (loss.ablation == Ablation::kTextOnly || loss.ablation == Ablation::kImageOnly) {
    Tensor e = loss.ablation == Ablation::kTextOnly ? refine_text_only(batch.text)
                                                    : refine_image_only(batch.image);
    out.logits = head_final.forward(e);
    out.task = cross_entropy_logits(out.logits, batch.labels);
    out.uni = zero;
    out.interaction = zero;
    out.total = out.task;
    return out;
  }

  Refined refined = refine(batch.text, batch.image);
  UnimodalOutput uni = loss.detach_unimodal
                           ? unimodal_predict(detach(refined.e_t), detach(refined.e_i))
                           : unimodal_predict(refined.e_t, refined.e_i);
  out.p_text = uni.p_text;
  out.p_image = uni.p_image;
  out.uni = scale(add(cross_entropy_logits(uni.logits_text, batch.labels),
                      cross_entropy_logits(uni.logits_image, batch.labels)),
                  0.5);

  // Routing targets are read from values only: no gradient reaches them.
  out.labels.reserve(batch.size());
  out.targets.reserve(batch.size());
  for (std::size_t b = 0; b < batch.size(); ++b) {
    InteractionLabel label = interaction_label(row(uni.p_text, b), row(uni.p_image, b),
                                               row(batch.clip_text, b), row(batch.clip_image, b),
                                               loss.thresholds);
    std::size_t target = static_cast<std::size_t>(label.y_int);
    if (loss.ablation == Ablation::kNoSem) target = target & 2U;
    if (loss.ablation == Ablation::kNoAgr) target = target & 1U;
    out.labels.push_back(label);
    out.targets.push_back(target);
  }

  InteractionGate::Output routing =
      gate.forward(refined.e_t, refined.e_i, project_clip(batch.clip_text),
                   project_clip(batch.clip_image));
  out.dispatch = routing.dispatch;
  out.routed = argmax_rows(routing.dispatch);
  out.logits = fuse_and_classify(refined, out.routed, routing.dispatch);
  out.task = cross_entropy_logits(out.logits, batch.labels);

  InteractionLossOptions int_options;
  int_options.eta = loss.ablation == Ablation::kNoReg ? 0.0 : loss.eta;
  int_options.gamma = loss.ablation == Ablation::kNoReg ? 0.0 : loss.gamma;
  int_options.balance = loss.balance;
  int_options.supervised = loss.ablation != Ablation::kNoInt;
  out.interaction_parts =
      interaction_loss(routing.logits, routing.dispatch, out.targets, out.routed, int_options);
  out.interaction = out.interaction_parts.total;

  out.total = add(add(out.task, scale(out.uni, loss.alpha)), scale(out.interaction, loss.beta));
  return out;
}

ParameterList MimoeModel::gate_parameters() const {
  ParameterList out;
  if (proj_clip) proj_clip->collect(out, "proj_clip");
  gate.collect(out, "gate");
  return out;
}

ParameterList MimoeModel::main_parameters() const {
  ParameterList out;
  proj_text.collect(out, "proj_text");
  proj_img.collect(out, "proj_img");
  refine_text.collect(out, "refine_text");
  refine_img.collect(out, "refine_img");
  refine_multi.collect(out, "refine_multi");
  head_text.collect(out, "head_text");
  head_img.collect(out, "head_img");
  norm_text.collect(out, "norm_text");
  norm_img.collect(out, "norm_img");
  for (std::size_t k = 0; k < kFusionExperts; ++k) {
    fusion[k].collect(out, "fusion" + std::to_string(k));
  }
  head_final.collect(out, "head_final");
  return out;
}

ParameterList MimoeModel::parameters() const {
  ParameterList out = main_parameters();
  ParameterList g = gate_parameters();
  out.insert(out.end(), g.begin(), g.end());
  return out;
}

}  // namespace mimoe
