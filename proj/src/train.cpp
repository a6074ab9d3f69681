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

#include "mimoe/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "mimoe/errors.hpp"
#include "mimoe/optim.hpp"

namespace mimoe {

namespace {

bool unimodal(Ablation a) { return a == Ablation::kTextOnly || a == Ablation::kImageOnly; }

void accumulate(LossComponents& acc, const ForwardOutput& out, double weight) {
  acc.total += weight * out.total.item();
  acc.task += weight * out.task.item();
  acc.uni += weight * out.uni.item();
  acc.interaction += weight * out.interaction.item();
  if (out.interaction_parts.total.size() == 1 && out.interaction_parts.classification.size() == 1) {
    acc.classification += weight * out.interaction_parts.classification.item();
    acc.router_z += weight * out.interaction_parts.router_z.item();
    acc.balance += weight * out.interaction_parts.balance.item();
  }
}

void scale(LossComponents& acc, double s) {
  acc.total *= s;
  acc.task *= s;
  acc.uni *= s;
  acc.interaction *= s;
  acc.classification *= s;
  acc.router_z *= s;
  acc.balance *= s;
}

}  // namespace

void check_dims(const ModelConfig& m, const BundleHeader& h) {
  if (m.text_dim != h.text_dim || m.image_dim != h.image_dim || m.clip_raw_dim != h.clip_dim) {
    throw ShapeError("model expects text/image/clip dims " + std::to_string(m.text_dim) + "/" +
                     std::to_string(m.image_dim) + "/" + std::to_string(m.clip_raw_dim) +
                     ", bundle has " + std::to_string(h.text_dim) + "/" +
                     std::to_string(h.image_dim) + "/" + std::to_string(h.clip_dim));
  }
}

Metrics evaluate(const MimoeModel& model, const BundleHeader& header,
                 std::span<const EmbeddingRecord> records, const LossConfig& loss,
                 std::size_t eval_batch) {
  check_dims(model.config(), header);
  if (records.empty()) throw DomainError("evaluate: no records");
  if (eval_batch == 0) throw DomainError("evaluate: eval_batch must be >= 1");
  NoGradGuard no_grad;

  std::vector<std::size_t> predicted;
  std::vector<std::size_t> labels;
  std::vector<std::size_t> routed;
  std::vector<std::size_t> targets;
  std::vector<InteractionLabel> interaction;
  std::vector<int> truth;
  LossComponents loss_sum;

  for (std::size_t start = 0; start < records.size(); start += eval_batch) {
    const std::size_t n = std::min(eval_batch, records.size() - start);
    Batch batch = make_batch(header, records.subspan(start, n));
    ForwardOutput out = model.forward_loss(batch, loss);
    accumulate(loss_sum, out, static_cast<double>(n));
    const std::vector<std::size_t> pred = argmax_rows(out.logits);
    predicted.insert(predicted.end(), pred.begin(), pred.end());
    labels.insert(labels.end(), batch.labels.begin(), batch.labels.end());
    truth.insert(truth.end(), batch.truth.begin(), batch.truth.end());
    routed.insert(routed.end(), out.routed.begin(), out.routed.end());
    targets.insert(targets.end(), out.targets.begin(), out.targets.end());
    interaction.insert(interaction.end(), out.labels.begin(), out.labels.end());
  }

  Metrics m = classification_metrics(predicted, labels);
  scale(loss_sum, 1.0 / static_cast<double>(records.size()));
  m.loss = loss_sum;
  if (unimodal(loss.ablation)) return m;

  std::size_t with_truth = 0;
  std::size_t routed_hits = 0;
  std::size_t target_hits = 0;
  std::size_t routed_target_hits = 0;
  for (std::size_t i = 0; i < routed.size(); ++i) {
    const std::size_t k = routed[i];
    ++m.routing[k];
    ++m.targets[targets[i]];
    m.mean_delta[k] += interaction[i].delta;
    m.mean_rho[k] += interaction[i].rho;
    if (k == targets[i]) ++routed_target_hits;
    if (truth[i] >= 0) {
      const auto t = static_cast<std::size_t>(truth[i]);
      ++with_truth;
      ++m.truth_routing[t][k];
      if (k == t) ++routed_hits;
      if (targets[i] == t) ++target_hits;
    }
  }
  for (std::size_t k = 0; k < kInteractionClasses; ++k) {
    if (m.routing[k] > 0) {
      m.mean_delta[k] /= static_cast<double>(m.routing[k]);
      m.mean_rho[k] /= static_cast<double>(m.routing[k]);
    }
  }
  m.routed_target_agreement =
      static_cast<double>(routed_target_hits) / static_cast<double>(routed.size());
  if (with_truth > 0) {
    m.routing_agreement = static_cast<double>(routed_hits) / static_cast<double>(with_truth);
    m.target_agreement = static_cast<double>(target_hits) / static_cast<double>(with_truth);
  }
  return m;
}

HoldoutSplit split_holdout(std::span<const EmbeddingRecord> records, double holdout,
                           std::uint64_t seed) {
  if (records.size() < 2) throw DomainError("split_holdout: need at least two records");
  if (!(holdout > 0.0 && holdout < 1.0)) throw DomainError("split_holdout: holdout outside (0, 1)");
  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  auto n_test = static_cast<std::size_t>(std::llround(holdout * static_cast<double>(records.size())));
  n_test = std::clamp<std::size_t>(n_test, 1, records.size() - 1);
  HoldoutSplit split;
  for (std::size_t j = 0; j < order.size(); ++j) {
    (j < n_test ? split.test : split.train).push_back(records[order[j]]);
  }
  return split;
}

TrainResult train(MimoeModel& model, const BundleHeader& header,
                  std::span<const EmbeddingRecord> train_set,
                  std::span<const EmbeddingRecord> eval_set, const TrainConfig& cfg,
                  const std::function<void(const EpochLog&)>& on_epoch) {
  cfg.validate(/*allow_zero_rates=*/true);
  check_dims(model.config(), header);
  if (train_set.empty()) throw DomainError("train: empty training set");
  if (eval_set.empty()) throw DomainError("train: empty evaluation set");

  const ParameterList gate_params = model.gate_parameters();
  const ParameterList main_params = model.main_parameters();
  check_partition(model.parameters(), gate_params, main_params);
  AdamW gate_opt(gate_params, {.lr = cfg.lr_gate, .weight_decay = cfg.weight_decay});
  AdamW main_opt(main_params, {.lr = cfg.lr_main, .weight_decay = cfg.weight_decay});

  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainResult result;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::shuffle(order.begin(), order.end(), rng);
    EpochLog log;
    log.epoch = epoch;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++batch_index) {
      const std::size_t n = std::min(cfg.batch_size, order.size() - start);
      const std::span<const std::size_t> idx(order.data() + start, n);
      try {
        Batch batch = make_batch(header, train_set, idx);
        Tape tape;
        Tape::Scope scope(tape);
        ForwardOutput out = model.forward_loss(batch, cfg.loss);
        tape.backward(out.total);
        gate_opt.step();
        main_opt.step();
        gate_opt.zero_grad();
        main_opt.zero_grad();
        accumulate(log.train, out, static_cast<double>(n));
      } catch (const NumericFault& e) {
        throw NumericFault(e.op(), std::string(e.what()) + " (epoch " + std::to_string(epoch) +
                                       ", batch " + std::to_string(batch_index) + ")");
      }
    }
    scale(log.train, 1.0 / static_cast<double>(train_set.size()));
    log.eval = evaluate(model, header, eval_set, cfg.loss, cfg.eval_batch);
    log.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (result.epochs.empty() || log.eval.accuracy > result.best.accuracy) {
      result.best = log.eval;
      result.best_epoch = epoch;
    }
    result.final = log.eval;
    if (on_epoch) on_epoch(log);
    result.epochs.push_back(std::move(log));
  }
  return result;
}

SweepParam parse_sweep_param(std::string_view name) {
  if (name == "beta") return SweepParam::kBeta;
  if (name == "lr_gate" || name == "lambda") return SweepParam::kLrGate;
  throw ConfigError("sweep parameter must be beta or lr_gate, got '" + std::string(name) + "'");
}

std::string_view to_string(SweepParam p) { return p == SweepParam::kBeta ? "beta" : "lr_gate"; }

std::vector<SweepRow> sweep(const TrainConfig& base, SweepParam param,
                            std::span<const double> values, const BundleHeader& header,
                            std::span<const EmbeddingRecord> train_set,
                            std::span<const EmbeddingRecord> eval_set,
                            const std::function<void(const SweepRow&)>& on_row) {
  if (values.empty()) throw ConfigError("sweep: no values given");
  std::vector<SweepRow> rows;
  for (double v : values) {
    TrainConfig cfg = base;
    if (param == SweepParam::kBeta) {
      cfg.loss.beta = v;
    } else {
      cfg.lr_gate = v;
    }
    MimoeModel model(cfg.model);
    TrainResult r = train(model, header, train_set, eval_set, cfg);
    SweepRow row{v, r.best_epoch, r.best, r.final};
    if (on_row) on_row(row);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string epoch_csv_header() {
  return "epoch,train_total,train_task,train_uni,train_interaction,train_classification,"
         "train_router_z,train_balance,eval_accuracy,eval_fake_f1,eval_real_f1,eval_total,"
         "routing_agreement,min_routing_share,route_dm,route_da,route_am,route_aa,seconds";
}

std::string epoch_csv_row(const EpochLog& log) {
  std::ostringstream os;
  os.precision(10);
  const LossComponents& t = log.train;
  const Metrics& e = log.eval;
  os << log.epoch << ',' << t.total << ',' << t.task << ',' << t.uni << ',' << t.interaction << ','
     << t.classification << ',' << t.router_z << ',' << t.balance << ',' << e.accuracy << ','
     << e.fake.f1 << ',' << e.real.f1 << ',' << e.loss.total << ',';
  if (e.routing_agreement) os << *e.routing_agreement;
  os << ',' << min_routing_share(e);
  for (std::size_t k : e.routing) os << ',' << k;
  os << ',' << log.seconds;
  return os.str();
}

}  // namespace mimoe
