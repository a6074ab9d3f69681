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

#include "mimoe/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

namespace mimoe {

namespace {

using Rng = std::mt19937_64;

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

void normalize(std::vector<double>& v) {
  const double n = std::sqrt(dot(v, v));
  for (double& x : v) x /= n;
}

std::vector<double> gaussian(std::size_t n, double stddev, Rng& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  std::vector<double> v(n);
  for (double& x : v) x = dist(rng);
  return v;
}

std::vector<double> random_unit(std::size_t n, Rng& rng) {
  std::vector<double> v;
  do {
    v = gaussian(n, 1.0, rng);
  } while (dot(v, v) < 1e-12);
  normalize(v);
  return v;
}

// Random unit vector orthogonal to the unit vector u.
std::vector<double> random_orthogonal(const std::vector<double>& u, Rng& rng) {
  for (;;) {
    std::vector<double> w = gaussian(u.size(), 1.0, rng);
    const double proj = dot(w, u);
    for (std::size_t i = 0; i < w.size(); ++i) w[i] -= proj * u[i];
    if (dot(w, w) > 1e-8) {
      normalize(w);
      return w;
    }
  }
}

SynthWorld draw_world(const SynthConfig& cfg, Rng& rng) {
  SynthWorld world;
  world.text_axis = random_unit(cfg.text_dim, rng);
  world.image_axis = random_unit(cfg.image_dim, rng);
  world.clip_keys[0] = random_unit(cfg.clip_dim, rng);
  world.clip_keys[1] = random_orthogonal(world.clip_keys[0], rng);
  return world;
}

// Posterior of "both cues correct" given that the two flips are equal.
double concordant_correct(double p_text, double p_image) {
  const double both = p_text * p_image;
  const double neither = (1.0 - p_text) * (1.0 - p_image);
  return both / (both + neither);
}

void fill_tokens(std::vector<float>& out, std::size_t tokens, const std::vector<double>& axis,
                 int cue, const SynthConfig& cfg, Rng& rng) {
  std::normal_distribution<double> noise(0.0, cfg.noise);
  const double offset = (cue == 1 ? 0.5 : -0.5) * cfg.separation;
  const std::size_t dim = axis.size();
  out.resize(tokens * dim);
  for (std::size_t t = 0; t < tokens; ++t) {
    for (std::size_t c = 0; c < dim; ++c) {
      out[t * dim + c] = static_cast<float>(offset * axis[c] + noise(rng));
    }
  }
}

EmbeddingRecord make_record(int regime, const SynthConfig& cfg, const SynthWorld& world,
                            Rng& rng) {
  std::bernoulli_distribution coin(0.5);
  const int y = coin(rng) ? 1 : 0;
  const bool agreed = regime >= 2;
  const bool aligned = (regime & 1) != 0;

  bool text_correct = true;
  bool image_correct = true;
  if (agreed) {
    std::bernoulli_distribution correct(concordant_correct(cfg.p_text, cfg.p_image));
    text_correct = image_correct = correct(rng);
  } else if (aligned) {
    text_correct = std::bernoulli_distribution(cfg.p_text)(rng);
    image_correct = !text_correct;
  } else {
    image_correct = std::bernoulli_distribution(cfg.p_image)(rng);
    text_correct = !image_correct;
  }
  const int text_cue = text_correct ? y : 1 - y;
  const int image_cue = image_correct ? y : 1 - y;

  EmbeddingRecord r;
  r.label = static_cast<std::uint8_t>(y);
  r.interaction_truth = static_cast<std::uint8_t>(regime);
  fill_tokens(r.text, cfg.text_tokens, world.text_axis, text_cue, cfg, rng);
  fill_tokens(r.image, cfg.image_tokens, world.image_axis, image_cue, cfg, rng);

  // clip_text: the text cue's key direction plus jitter, renormalized.
  std::vector<double> m_t = world.clip_keys[text_cue];
  const std::vector<double> jitter =
      gaussian(cfg.clip_dim, cfg.clip_jitter / std::sqrt(static_cast<double>(cfg.clip_dim)), rng);
  for (std::size_t i = 0; i < m_t.size(); ++i) m_t[i] += jitter[i];
  normalize(m_t);

  // clip_image = rho * m_t + sqrt(1 - rho^2) * w with w a unit vector orthogonal to m_t.
  const double rho = aligned ? cfg.rho_hi : cfg.rho_lo;
  const std::vector<double> w = random_orthogonal(m_t, rng);
  const double ortho = std::sqrt(std::max(0.0, 1.0 - rho * rho));
  std::vector<double> m_i(m_t.size());
  for (std::size_t i = 0; i < m_i.size(); ++i) m_i[i] = rho * m_t[i] + ortho * w[i];
  if (cfg.clip_noise > 0.0) {
    const std::vector<double> n =
        gaussian(cfg.clip_dim, cfg.clip_noise / std::sqrt(static_cast<double>(cfg.clip_dim)), rng);
    for (std::size_t i = 0; i < m_i.size(); ++i) m_i[i] += n[i];
  }

  r.clip_text.assign(m_t.begin(), m_t.end());
  r.clip_image.assign(m_i.begin(), m_i.end());
  return r;
}

std::vector<EmbeddingRecord> make_split(const std::array<std::uint32_t, 4>& counts,
                                        const SynthConfig& cfg, const SynthWorld& world,
                                        Rng& rng) {
  std::vector<int> regimes;
  for (int r = 0; r < 4; ++r) regimes.insert(regimes.end(), counts[r], r);
  std::shuffle(regimes.begin(), regimes.end(), rng);
  std::vector<EmbeddingRecord> records;
  records.reserve(regimes.size());
  for (int r : regimes) records.push_back(make_record(r, cfg, world, rng));
  return records;
}

std::uint32_t total(const std::array<std::uint32_t, 4>& counts) {
  return std::accumulate(counts.begin(), counts.end(), std::uint32_t{0});
}

}  // namespace

void SynthConfig::validate() const {
  auto fail = [](const std::string& msg) { throw SynthError("synthetic config: " + msg); };
  if (total(counts) == 0) fail("no samples requested");
  if (!(p_text >= 0.5 && p_text <= 1.0) || !(p_image >= 0.5 && p_image <= 1.0)) {
    fail("predictabilities must lie in [0.5, 1]");
  }
  if (!(std::abs(rho_hi) <= 1.0) || !(std::abs(rho_lo) <= 1.0)) fail("rho outside [-1, 1]");
  if (!(rho_lo < rho_hi)) fail("rho_lo must be below rho_hi");
  if (!(separation > 0.0) || !(noise >= 0.0) || !(clip_jitter >= 0.0) || !(clip_noise >= 0.0)) {
    fail("separation must be positive and noise scales nonnegative");
  }
  if (text_tokens == 0 || text_dim == 0 || image_tokens == 0 || image_dim == 0) {
    fail("token dimensions must be >= 1");
  }
  if (clip_dim < 2) fail("clip_dim must be >= 2 to build misaligned pairs");
}

BundleHeader SynthConfig::header() const {
  BundleHeader h;
  h.text_tokens = text_tokens;
  h.text_dim = text_dim;
  h.image_tokens = image_tokens;
  h.image_dim = image_dim;
  h.clip_dim = clip_dim;
  return h;
}

SynthWorld synth_world(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  return draw_world(cfg, rng);
}

SynthData generate_synthetic(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  const SynthWorld world = draw_world(cfg, rng);
  SynthData data;
  data.header = cfg.header();
  data.train = make_split(cfg.counts, cfg, world, rng);
  if (total(cfg.test_counts) > 0) data.test = make_split(cfg.test_counts, cfg, world, rng);
  data.header.n_samples = static_cast<std::uint32_t>(data.train.size());
  return data;
}

}  // namespace mimoe
