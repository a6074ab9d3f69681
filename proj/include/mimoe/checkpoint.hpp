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

// MIMC checkpoints, little-endian:
//
//   char[4] "MIMC", u32 version (1)
//   u64 x 12 model config (raw dims, d, d_c, hidden, experts, heads,
//            ff_ratio, seed)
//   str      training config text (u32 length + UTF-8 bytes)
//   u32      parameter count
//   per parameter: str name, u32 rank, u64 dims[rank], f64 values[numel]

#include <filesystem>
#include <stdexcept>
#include <vector>

#include "mimoe/config.hpp"
#include "mimoe/model.hpp"

namespace mimoe {

inline constexpr char kCheckpointMagic[4] = {'M', 'I', 'M', 'C'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::vector<std::uint8_t> encode_checkpoint(const MimoeModel& model, const TrainConfig& cfg);

struct LoadedCheckpoint {
  TrainConfig config;  // config.model matches model.config()
  MimoeModel model;
};
LoadedCheckpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::filesystem::path& path, const MimoeModel& model,
                     const TrainConfig& cfg);
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace mimoe
