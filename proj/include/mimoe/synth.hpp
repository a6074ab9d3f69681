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
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "mimoe/bundle.hpp"

namespace mimoe {

/// Synthetic embedding bundles covering the four interaction regimes.
///
/// Every sample carries a label y and, per modality, a binary cue (the class
/// whose center its tokens are drawn from). A cue "flips" when it points at
/// the wrong class. Regimes fix how the two cues relate:
///
///   agreed (AM, AA)   cues concordant. Flips are drawn independently with
///                     probabilities 1 - p_text and 1 - p_image and conditioned
///                     on being equal.
///   DA                cues discordant; text carries the correct cue with
///                     probability p_text.
///   DM                cues discordant; image carries the correct cue with
///                     probability p_image.
///
/// The alignment vectors are built so that cos(clip_text, clip_image) is
/// exactly rho_hi in aligned regimes and rho_lo otherwise (before clip_noise).
struct SynthConfig {
  // Indexed by interaction class: DM, DA, AM, AA.
  std::array<std::uint32_t, 4> counts{1000, 1000, 1000, 1000};
  std::array<std::uint32_t, 4> test_counts{0, 0, 0, 0};

  double p_text = 0.85;
  double p_image = 0.75;
  double rho_hi = 0.8;
  double rho_lo = 0.0;
  double separation = 2.0;   // distance between the two class centers
  double noise = 1.0;        // per-coordinate token noise
  double clip_jitter = 0.25; // spread of clip_text around its cue direction
  double clip_noise = 0.0;   // perturbation added to clip_image after construction

  std::uint32_t text_tokens = 8;
  std::uint32_t text_dim = 32;
  std::uint32_t image_tokens = 8;
  std::uint32_t image_dim = 32;
  std::uint32_t clip_dim = 16;

  std::uint64_t seed = 2024;

  /// Throws SynthError on infeasible settings.
  void validate() const;
  BundleHeader header() const;
};

class SynthError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct SynthData {
  BundleHeader header;
  std::vector<EmbeddingRecord> train;
  std::vector<EmbeddingRecord> test;  // empty unless test_counts is set
};

/// Deterministic in cfg (including seed). Train and test share class
/// centers and cue directions.
SynthData generate_synthetic(const SynthConfig& cfg);

/// Fixed geometry shared by every sample of a configuration: unit class
/// axes for the token centers (center(c) = +-separation/2 * axis) and two
/// orthonormal cue directions for clip_text.
struct SynthWorld {
  std::vector<double> text_axis;
  std::vector<double> image_axis;
  std::array<std::vector<double>, 2> clip_keys;
};
SynthWorld synth_world(const SynthConfig& cfg);

}  // namespace mimoe
