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
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mimoe/bundle.hpp"
#include "mimoe/config.hpp"
#include "mimoe/metrics.hpp"
#include "mimoe/model.hpp"

namespace mimoe {

/// Deterministic evaluation in fixed chunks of `eval_batch` records.
Metrics evaluate(const MimoeModel& model, const BundleHeader& header,
                 std::span<const EmbeddingRecord> records, const LossConfig& loss,
                 std::size_t eval_batch);

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  LossComponents train;   // means over training batches
  Metrics eval;
  double seconds = 0.0;
};

struct TrainResult {
  std::vector<EpochLog> epochs;
  std::size_t best_epoch = 0;  // highest eval accuracy, earliest on ties
  Metrics best;
  Metrics final;
};

/// Throws ShapeError when the model was built for different raw dimensions.
void check_dims(const ModelConfig& model, const BundleHeader& header);

/// Seeded shuffle of the records into train and held-out parts; the held-out
/// part holds round(holdout * n) records (at least one).
struct HoldoutSplit {
  std::vector<EmbeddingRecord> train;
  std::vector<EmbeddingRecord> test;
};
HoldoutSplit split_holdout(std::span<const EmbeddingRecord> records, double holdout,
                           std::uint64_t seed);

/// Trains in place. Each batch: forward_loss, one backward, then the gate
/// optimizer (lr_gate) steps gate parameters and the main optimizer (lr_main)
/// everything else. A NumericFault is rethrown with the epoch and batch.
TrainResult train(MimoeModel& model, const BundleHeader& header,
                  std::span<const EmbeddingRecord> train_set,
                  std::span<const EmbeddingRecord> eval_set, const TrainConfig& cfg,
                  const std::function<void(const EpochLog&)>& on_epoch = {});

enum class SweepParam { kBeta, kLrGate };
SweepParam parse_sweep_param(std::string_view name);
std::string_view to_string(SweepParam p);

struct SweepRow {
  double value = 0.0;
  std::size_t best_epoch = 0;
  Metrics best;
  Metrics final;
};

/// One fresh model (same initialization seed) per value.
std::vector<SweepRow> sweep(const TrainConfig& base, SweepParam param,
                            std::span<const double> values, const BundleHeader& header,
                            std::span<const EmbeddingRecord> train_set,
                            std::span<const EmbeddingRecord> eval_set,
                            const std::function<void(const SweepRow&)>& on_row = {});

/// CSV header and row for per-epoch logs.
std::string epoch_csv_header();
std::string epoch_csv_row(const EpochLog& log);

}  // namespace mimoe
