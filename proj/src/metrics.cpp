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

#include "mimoe/metrics.hpp"

#include <algorithm>
#include <numeric>

#include "mimoe/errors.hpp"

namespace mimoe {

namespace {

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

nlohmann::json to_json(const ClassScores& s) {
  return {{"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}, {"support", s.support}};
}

nlohmann::json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

}  // namespace

ClassScores class_scores(std::size_t tp, std::size_t fp, std::size_t fn) {
  ClassScores s;
  s.precision = ratio(tp, tp + fp);
  s.recall = ratio(tp, tp + fn);
  s.f1 = s.precision + s.recall > 0.0
             ? 2.0 * s.precision * s.recall / (s.precision + s.recall)
             : 0.0;
  s.support = tp + fn;
  return s;
}

Metrics classification_metrics(std::span<const std::size_t> predicted,
                               std::span<const std::size_t> labels) {
  if (predicted.size() != labels.size()) {
    throw ShapeError("classification_metrics: " + std::to_string(predicted.size()) +
                     " predictions for " + std::to_string(labels.size()) + " labels");
  }
  Metrics m;
  m.samples = labels.size();
  Confusion& c = m.confusion;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] > 1 || predicted[i] > 1) throw DomainError("labels must be 0 or 1");
    const bool fake_pred = predicted[i] == kFakeLabel;
    const bool fake_true = labels[i] == kFakeLabel;
    if (fake_pred && fake_true) ++c.tp;
    if (fake_pred && !fake_true) ++c.fp;
    if (!fake_pred && !fake_true) ++c.tn;
    if (!fake_pred && fake_true) ++c.fn;
  }
  m.accuracy = ratio(c.tp + c.tn, m.samples);
  m.fake = class_scores(c.tp, c.fp, c.fn);
  m.real = class_scores(c.tn, c.fn, c.fp);
  return m;
}

double min_routing_share(const Metrics& m) {
  const std::size_t total = std::accumulate(m.routing.begin(), m.routing.end(), std::size_t{0});
  if (total == 0) return 0.0;
  return ratio(*std::min_element(m.routing.begin(), m.routing.end()), total);
}

nlohmann::json to_json(const LossComponents& l) {
  return {{"total", l.total},
          {"task", l.task},
          {"uni", l.uni},
          {"interaction", l.interaction},
          {"classification", l.classification},
          {"router_z", l.router_z},
          {"balance", l.balance}};
}

nlohmann::json to_json(const Metrics& m) {
  nlohmann::json experts = nlohmann::json::array();
  for (std::size_t k = 0; k < kInteractionClasses; ++k) {
    experts.push_back({{"expert", k},
                       {"regime", interaction_name(static_cast<int>(k))},
                       {"dispatched", m.routing[k]},
                       {"targeted", m.targets[k]},
                       {"mean_delta", m.mean_delta[k]},
                       {"mean_rho", m.mean_rho[k]},
                       {"truth_row", m.truth_routing[k]}});
  }
  return {{"samples", m.samples},
          {"accuracy", m.accuracy},
          {"confusion", {{"tp", m.confusion.tp},
                         {"fp", m.confusion.fp},
                         {"tn", m.confusion.tn},
                         {"fn", m.confusion.fn}}},
          {"fake", to_json(m.fake)},
          {"real", to_json(m.real)},
          {"routing", experts},
          {"routing_agreement", optional_json(m.routing_agreement)},
          {"target_agreement", optional_json(m.target_agreement)},
          {"routed_target_agreement", m.routed_target_agreement},
          {"min_routing_share", min_routing_share(m)},
          {"loss", to_json(m.loss)}};
}

}  // namespace mimoe
