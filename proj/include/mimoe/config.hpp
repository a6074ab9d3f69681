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
#include <filesystem>
#include <string>
#include <string_view>

#include "mimoe/model.hpp"

namespace mimoe {

enum class Precision { kDouble, kSingle };

/// Everything a training run needs besides the data.
///
/// Text form: one `key = value` per line, `#` starts a comment, blank lines
/// ignored. Unknown keys and malformed values raise ConfigError with the
/// line number.
struct TrainConfig {
  ModelConfig model;
  LossConfig loss;
  double lr_main = 1e-5;
  double lr_gate = 1e-4;
  double weight_decay = 0.0;
  std::size_t batch_size = 24;
  std::size_t epochs = 50;
  std::size_t eval_batch = 256;  // fixed so evaluation is reproducible bitwise
  double holdout = 0.1;          // used only when no test bundle is given
  std::uint64_t seed = 2024;     // shuffling and holdout split
  Precision precision = Precision::kDouble;

  /// Invariants: rates > 0, batch sizes >= 1, epochs >= 1, thresholds valid.
  /// train() passes allow_zero_rates so a run can be frozen deliberately.
  void validate(bool allow_zero_rates = false) const;
};

TrainConfig parse_config(std::string_view text);
TrainConfig load_config(const std::filesystem::path& path);

/// Applies one key/value pair; throws ConfigError on unknown keys or values.
void set_config_value(TrainConfig& cfg, std::string_view key, std::string_view value);

/// Canonical text form; parse_config(to_text(c)) reproduces c exactly.
std::string to_text(const TrainConfig& cfg);

/// Copies the bundle's raw dimensions into the model config.
void adopt_bundle_dims(TrainConfig& cfg, const BundleHeader& header);

std::string_view to_string(BalanceMode mode);
std::string_view to_string(Precision precision);

}  // namespace mimoe
