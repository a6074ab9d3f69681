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

// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Thresholds are fixed here; nothing is tuned at run time.
//
//   acceptance [--only name[,name...]]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "mimoe/bundle.hpp"
#include "mimoe/config.hpp"
#include "mimoe/gradcheck.hpp"
#include "mimoe/interaction.hpp"
#include "mimoe/metrics.hpp"
#include "mimoe/model.hpp"
#include "mimoe/ops.hpp"
#include "mimoe/synth.hpp"
#include "mimoe/train.hpp"

namespace {

using namespace mimoe;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

struct Verdict {
  bool pass = false;
  std::string detail;
};

// ---------------------------------------------------------------------------
// Shared benchmark

struct Benchmark {
  SynthData data;
  TrainConfig cfg;
};

const Benchmark& benchmark() {
  static const Benchmark b = [] {
    SynthConfig s;  // p_t .85, p_i .75, rho .8 / .0
    s.counts = {1000, 1000, 1000, 1000};
    s.test_counts = {250, 250, 250, 250};
    s.seed = 2024;
    Benchmark out{generate_synthetic(s), load_config(MIMOE_CONFIG_DIR "/benchmark.conf")};
    adopt_bundle_dims(out.cfg, out.data.header);
    return out;
  }();
  return b;
}

TrainResult run(TrainConfig cfg) {
  const Benchmark& b = benchmark();
  MimoeModel model(cfg.model);
  return train(model, b.data.header, b.data.train, b.data.test, cfg);
}

// ---------------------------------------------------------------------------
// 1. Gradient suite

Verdict gradients() {
  const auto t0 = Clock::now();
  const std::vector<GradCheckResult> results = gradient_suite();
  const double secs = seconds_since(t0);
  double worst_prim = 0, worst_comp = 0;
  std::size_t failed = 0;
  std::set<std::string> blocks;
  for (const auto& r : results) {
    double& worst = r.name.starts_with("op/") ? worst_prim : worst_comp;
    worst = std::max(worst, r.max_rel_error);
    if (!r.passed()) {
      ++failed;
      std::cout << "  failed: " << r.name << " rel " << r.max_rel_error << '\n';
    }
    if (r.name.starts_with("block/")) blocks.insert(r.name);
  }
  bool covered = true;
  for (const char* need : {"block/mlp", "block/transformer_block", "block/imoe_block",
                           "block/interaction_gate", "block/full_model"}) {
    covered &= blocks.count(need) > 0;
  }
  return {failed == 0 && covered && secs < 120.0,
          fmt("%zu checks, %zu failed, worst primitive %.2e (<= 1e-6), worst composite %.2e "
              "(<= 1e-4), coverage %s, %.1f s (< 120 s)",
              results.size(), failed, worst_prim, worst_comp, covered ? "ok" : "MISSING", secs)};
}

// ---------------------------------------------------------------------------
// 2. Formula oracles, all recomputed from the raw values here.

double ref_js(const std::vector<double>& p, const std::vector<double>& q) {
  double s = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double m = 0.5 * (p[i] + q[i]);
    if (p[i] > 0) s += 0.5 * p[i] * std::log(p[i] / m);
    if (q[i] > 0) s += 0.5 * q[i] * std::log(q[i] / m);
  }
  return s;
}

double ref_ce(std::span<const double> logits, std::size_t classes,
              const std::vector<std::size_t>& y) {
  double s = 0;
  for (std::size_t b = 0; b < y.size(); ++b) {
    double mx = -1e300;
    for (std::size_t k = 0; k < classes; ++k) mx = std::max(mx, logits[b * classes + k]);
    double z = 0;
    for (std::size_t k = 0; k < classes; ++k) z += std::exp(logits[b * classes + k] - mx);
    s += mx + std::log(z) - logits[b * classes + y[b]];
  }
  return s / y.size();
}

double ref_router_z(std::span<const double> o, std::size_t rows) {
  double s = 0;
  for (std::size_t b = 0; b < rows; ++b) {
    double z = 0;
    for (std::size_t k = 0; k < 4; ++k) z += std::exp(o[b * 4 + k]);
    s += std::log(z) * std::log(z);
  }
  return s / rows;
}

double ref_balance(std::span<const double> p, const std::vector<std::size_t>& routed,
                   BalanceMode mode) {
  const double n = routed.size();
  double f[4] = {}, P[4] = {};
  for (std::size_t b = 0; b < routed.size(); ++b) {
    f[routed[b]] += 1 / n;
    for (std::size_t k = 0; k < 4; ++k) P[k] += p[b * 4 + k] / n;
  }
  double s = 0;
  for (int k = 0; k < 4; ++k) {
    s += mode == BalanceMode::kStMoe ? 4 * f[k] * P[k] : (P[k] - 0.25) * (P[k] - 0.25) / 4;
  }
  return s;
}

Verdict formulas() {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0, 1), wide(-4, 4);
  double worst = 0;
  auto track = [&worst](double a, double b) { worst = std::max(worst, std::abs(a - b)); };

  // JS: bounds on 1e5 random pairs over 2..6 classes, plus the direct formula.
  bool bounds = true;
  for (int i = 0; i < 100000; ++i) {
    const std::size_t k = 2 + rng() % 5;
    std::vector<double> p(k), q(k);
    for (auto* v : {&p, &q}) {
      double s = 0;
      for (double& x : *v) s += x = u(rng);
      for (double& x : *v) x /= s;
    }
    const double d = js_divergence(p, q);
    bounds &= d >= 0.0 && d <= std::numbers::ln2 + 1e-15;
    if (i % 10 == 0) track(d, ref_js(p, q));
  }

  // Losses on random logit batches.
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng() % 32;
    std::vector<double> o(n * 4), l(n * 2);
    for (double& x : o) x = wide(rng);
    for (double& x : l) x = wide(rng);
    std::vector<std::size_t> y4(n), y2(n);
    for (std::size_t b = 0; b < n; ++b) {
      y4[b] = rng() % 4;
      y2[b] = rng() % 2;
    }
    const Tensor logits = Tensor::from({n, 4}, o);
    const Tensor d = softmax(logits, -1);
    const std::vector<std::size_t> routed = argmax_rows(d);
    track(cross_entropy_logits(Tensor::from({n, 2}, l), y2).item(), ref_ce(l, 2, y2));
    track(router_z_loss(logits).item(), ref_router_z(o, n));
    for (BalanceMode m : {BalanceMode::kStMoe, BalanceMode::kPaperLiteral}) {
      track(balance_loss(d, routed, m).item(), ref_balance(d.data(), routed, m));
    }
    const InteractionLossParts parts = interaction_loss(logits, d, y4, routed, {});
    track(parts.total.item(), ref_ce(o, 4, y4) + 0.01 * ref_router_z(o, n) +
                                  0.1 * ref_balance(d.data(), routed, BalanceMode::kStMoe));
  }

  // L_uni, L_int and L on full-model forwards.
  ModelConfig mc;
  mc.text_dim = mc.image_dim = 6;
  mc.clip_raw_dim = 4;
  mc.dim = 8;
  mc.clip_dim = 4;
  mc.hidden = 8;
  mc.heads = 2;
  mc.ff_ratio = 2;
  SynthConfig s;
  s.text_tokens = s.image_tokens = 3;
  s.text_dim = s.image_dim = 6;
  s.clip_dim = 4;
  s.counts = {8, 8, 8, 8};
  const SynthData data = generate_synthetic(s);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    mc.seed = seed;
    const MimoeModel model(mc);
    std::vector<std::size_t> idx(12);
    for (std::size_t& i : idx) i = rng() % data.train.size();
    const Batch batch = make_batch(data.header, data.train, idx);
    LossConfig loss;
    loss.alpha = u(rng);
    loss.beta = u(rng);
    loss.thresholds.theta_agr = 0.001 + 0.1 * u(rng);
    const ForwardOutput out = model.forward_loss(batch, loss);

    double uni = 0;
    for (std::size_t b = 0; b < batch.size(); ++b) {
      uni -= std::log(out.p_text[b * 2 + batch.labels[b]]) +
             std::log(out.p_image[b * 2 + batch.labels[b]]);
    }
    uni /= 2.0 * batch.size();
    track(out.uni.item(), uni);

    const Refined r = model.refine(batch.text, batch.image);
    const Tensor o = model.gate
                         .forward(r.e_t, r.e_i, model.project_clip(batch.clip_text),
                                  model.project_clip(batch.clip_image))
                         .logits;
    std::vector<std::size_t> targets;
    for (std::size_t b = 0; b < batch.size(); ++b) {
      std::vector<double> pt(out.p_text.data().begin() + b * 2, out.p_text.data().begin() + b * 2 + 2);
      std::vector<double> pi(out.p_image.data().begin() + b * 2, out.p_image.data().begin() + b * 2 + 2);
      const std::size_t w = data.header.clip_dim;
      double ab = 0, aa = 0, bb = 0;
      for (std::size_t i = 0; i < w; ++i) {
        const double a = batch.clip_text[b * w + i], c = batch.clip_image[b * w + i];
        ab += a * c;
        aa += a * a;
        bb += c * c;
      }
      const double rho = ab / std::sqrt(aa * bb);
      const double delta = ref_js(pt, pi);
      targets.push_back(2 * (delta < loss.thresholds.theta_agr) + (rho > loss.thresholds.theta_sem));
    }
    const Tensor p = softmax(o, -1);
    const std::vector<std::size_t> routed = argmax_rows(p);
    const double l_int = ref_ce(o.data(), 4, targets) + 0.01 * ref_router_z(o.data(), batch.size()) +
                         0.1 * ref_balance(p.data(), routed, BalanceMode::kStMoe);
    track(out.interaction.item(), l_int);
    const double task = ref_ce(out.logits.data(), 2, batch.labels);
    track(out.task.item(), task);
    track(out.total.item(), task + loss.alpha * uni + loss.beta * l_int);
  }
  return {bounds && worst <= 1e-10,
          fmt("max |impl - direct| %.2e (<= 1e-10) over JS, CE, router-z, balance x2, L_int, "
              "L_uni, L; JS in [0, ln2] on 1e5 pairs: %s",
              worst, bounds ? "yes" : "NO")};
}

// ---------------------------------------------------------------------------
// 3. Routing correctness (also the seed-2024 member of the ablation mean)

TrainResult g_full_seed0;

Verdict routing() {
  const auto t0 = Clock::now();
  TrainConfig cfg = benchmark().cfg;
  g_full_seed0 = run(cfg);
  const double secs = seconds_since(t0);
  const Metrics& m = g_full_seed0.final;
  const double agreement = m.routing_agreement.value_or(0.0);
  const double share = min_routing_share(m);
  return {agreement >= 0.85 && share >= 0.05 && cfg.epochs <= 50 && secs < 900.0,
          fmt("agreement %.3f (>= 0.85), min expert share %.3f (>= 0.05), %zu epochs, %.0f s "
              "(< 900 s), accuracy %.3f",
              agreement, share, cfg.epochs, secs, m.accuracy)};
}

// ---------------------------------------------------------------------------
// 4. Ablation pattern, averaged over three initialization seeds.

Verdict ablation() {
  const std::uint64_t seeds[] = {2024, 2025, 2026};
  auto mean_accuracy = [&](Ablation a) {
    double s = 0;
    std::string each;
    for (std::uint64_t seed : seeds) {
      TrainConfig cfg = benchmark().cfg;
      cfg.loss.ablation = a;
      cfg.model.seed = seed;
      const double acc = (a == Ablation::kFull && seed == 2024 && !g_full_seed0.epochs.empty())
                             ? g_full_seed0.final.accuracy
                             : run(cfg).final.accuracy;
      s += acc;
      each += fmt("%s%.3f", each.empty() ? "" : "/", acc);
    }
    std::cout << "  " << to_string(a) << ": " << each << '\n';
    return s / 3;
  };
  const double full = mean_accuracy(Ablation::kFull);
  const double text = mean_accuracy(Ablation::kTextOnly);
  const double image = mean_accuracy(Ablation::kImageOnly);
  const double no_reg = mean_accuracy(Ablation::kNoReg);
  const bool pass = full - text >= 0.03 && text - image >= 0.03 && full - no_reg >= 0.02;
  return {pass, fmt("mean accuracy full %.3f, text-only %.3f, image-only %.3f, no-reg %.3f; "
                    "gaps full-text %+.3f (>= .03), text-image %+.3f (>= .03), full-noreg %+.3f "
                    "(>= .02)",
                    full, text, image, no_reg, full - text, text - image, full - no_reg)};
}

// ---------------------------------------------------------------------------
// 5. Sweep harness through the CLI

int shell(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Verdict sweep_beta() {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "mimoe_acceptance_sweep";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const Benchmark& b = benchmark();
  write_bundle(dir / "train.mimb", b.data.header, b.data.train);
  write_bundle(dir / "test.mimb", b.data.header, b.data.test);
  const std::string cmd = std::string(MIMOE_CLI_PATH) + " sweep --config " MIMOE_CONFIG_DIR
                          "/benchmark.conf --data " + (dir / "train.mimb").string() +
                          " --test " + (dir / "test.mimb").string() +
                          " --param beta --values 0,0.1,0.3,0.5,0.7,0.9 --out " +
                          (dir / "sweep.csv").string();
  const int rc = shell(cmd);
  std::ifstream in(dir / "sweep.csv");
  std::string line;
  std::getline(in, line);
  double base = -1, best = -1, best_beta = 0;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string value, acc;
    std::getline(ss, value, ',');
    std::getline(ss, acc, ',');
    const double beta = std::stod(value), accuracy = std::stod(acc);
    std::cout << "  beta " << value << ": final accuracy " << acc << '\n';
    ++rows;
    if (beta == 0.0) {
      base = accuracy;
    } else if (accuracy > best) {
      best = accuracy;
      best_beta = beta;
    }
  }
  fs::remove_all(dir);
  return {rc == 0 && rows == 6 && base >= 0 && best > base,
          fmt("exit %d, %zu rows; best nonzero beta %.1f accuracy %.3f vs beta=0 %.3f", rc, rows,
              best_beta, best, base)};
}

// ---------------------------------------------------------------------------
// 6. MIMB format

Verdict format() {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<std::uint32_t> dim(1, 16);
  std::normal_distribution<float> n(0.0f, 1.0f);
  std::size_t ok = 0;
  for (int iter = 0; iter < 1000; ++iter) {
    BundleHeader h;
    h.version = iter % 2 ? kBundleVersionTokenCounts : kBundleVersion;
    h.text_tokens = dim(rng);
    h.text_dim = dim(rng);
    h.image_tokens = dim(rng);
    h.image_dim = dim(rng);
    h.clip_dim = dim(rng);
    std::vector<EmbeddingRecord> recs(rng() % 5);
    for (auto& r : recs) {
      r.label = rng() % 2;
      r.interaction_truth = rng() % 2 ? rng() % 4 : kUnknownInteraction;
      for (auto [v, size] : {std::pair{&r.text, h.text_tokens * h.text_dim},
                             std::pair{&r.image, h.image_tokens * h.image_dim},
                             std::pair{&r.clip_text, h.clip_dim},
                             std::pair{&r.clip_image, h.clip_dim}}) {
        v->resize(size);
        for (float& x : *v) x = n(rng);
        (*v)[0] = 0.5f + std::abs((*v)[0]);
      }
      if (h.version == kBundleVersionTokenCounts) {
        r.text_valid = rng() % (h.text_tokens + 1);
        r.image_valid = rng() % (h.image_tokens + 1);
      }
    }
    const auto bytes = encode_bundle(h, recs);
    const Bundle back = decode_bundle(bytes);
    h.n_samples = recs.size();
    ok += back.header == h && back.records == recs && encode_bundle(back.header, back.records) == bytes;
  }

  // Corruptions, each expected to produce one specific code.
  BundleHeader h;
  h.text_tokens = h.image_tokens = 2;
  h.text_dim = h.image_dim = 3;
  h.clip_dim = 2;
  EmbeddingRecord r;
  r.label = 1;
  r.interaction_truth = 2;
  r.text.assign(6, 0.25f);
  r.image.assign(6, -0.25f);
  r.clip_text = {1.0f, 0.0f};
  r.clip_image = {0.0f, 1.0f};
  const std::vector<EmbeddingRecord> one{r, r};
  const auto good = encode_bundle(h, one);
  auto code_of = [](auto mutate, const std::vector<std::uint8_t>& base) {
    auto b = base;
    mutate(b);
    try {
      decode_bundle(b);
    } catch (const BundleError& e) {
      return static_cast<int>(e.code());
    }
    return 0;
  };
  const std::size_t rec = kBundleHeaderSize;
  const std::size_t clip_at = rec + 2 + 4 * 12;
  std::vector<std::pair<int, int>> cases;  // expected, got
  cases.emplace_back(2, code_of([](auto& b) { b[0] = 'X'; }, good));
  cases.emplace_back(3, code_of([](auto& b) { b[4] = 7; }, good));
  cases.emplace_back(4, code_of([](auto& b) { b[28] = 0; }, good));
  cases.emplace_back(5, code_of([](auto& b) { b.pop_back(); }, good));
  cases.emplace_back(6, code_of([](auto& b) { b.push_back(1); }, good));
  cases.emplace_back(7, code_of([&](auto& b) { b[rec + 5] = 0xff; b[rec + 4] = 0xc0; }, good));
  cases.emplace_back(9, code_of([&](auto& b) { b[rec] = 3; }, good));
  cases.emplace_back(10, code_of([&](auto& b) { std::fill_n(b.begin() + clip_at, 8, 0); }, good));
  {
    BundleHeader h2 = h;
    h2.version = kBundleVersionTokenCounts;
    std::vector<EmbeddingRecord> v2 = one;
    const auto good2 = encode_bundle(h2, v2);
    cases.emplace_back(8, code_of([](auto& b) { b[b.size() - 2] = 9; }, good2));
  }
  {
    int io = 0;
    try {
      read_bundle("/nonexistent/mimoe/x.mimb");
    } catch (const BundleError& e) {
      io = static_cast<int>(e.code());
    }
    cases.emplace_back(1, io);
  }
  std::size_t matched = 0;
  std::string wrong;
  for (auto [want, got] : cases) {
    if (want == got) {
      ++matched;
    } else {
      wrong += fmt(" %d->%d", want, got);
    }
  }
  return {ok == 1000 && matched == cases.size(),
          fmt("%zu/1000 random round trips (v1 and v2), %zu/%zu corruption codes%s", ok, matched,
              cases.size(), wrong.empty() ? "" : (" wrong:" + wrong).c_str())};
}

// ---------------------------------------------------------------------------
// 7. Complexity of the refinement forward in N

Verdict complexity() {
  ModelConfig mc;  // d = 32, 4 heads
  const MimoeModel model(mc);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0, 1);
  std::vector<double> xs, ys;
  std::string detail;
  for (std::size_t N : {32, 64, 128, 256}) {
    auto make = [&](std::size_t dim) {
      std::vector<double> v(4 * N * dim);
      for (double& x : v) x = n(rng);
      return Tensor::from({4, N, dim}, std::move(v));
    };
    const Tensor ut = make(mc.text_dim), ui = make(mc.image_dim);
    NoGradGuard guard;
    double best = 1e300;
    for (int rep = 0; rep < 7; ++rep) {
      const auto t0 = Clock::now();
      const Refined r = model.refine(ut, ui);
      best = std::min(best, seconds_since(t0));
      (void)r;
    }
    xs.push_back(std::log(static_cast<double>(N)));
    ys.push_back(std::log(best));
    detail += fmt("%sN=%zu %.2fms", detail.empty() ? "" : ", ", N, best * 1e3);
  }
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / ys.size();
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  const double slope = sxy / sxx;
  return {slope >= 1.2 && slope <= 2.3,
          fmt("log-log slope %.2f (in [1.2, 2.3]); %s", slope, detail.c_str())};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<std::string> only;
  if (argc == 3 && std::string(argv[1]) == "--only") {
    std::istringstream ss(argv[2]);
    for (std::string s; std::getline(ss, s, ',');) only.insert(s);
  } else if (argc != 1) {
    std::cerr << "usage: acceptance [--only name,...]\n";
    return 2;
  }
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"gradients", gradients}, {"formulas", formulas}, {"routing", routing},
      {"ablation", ablation},   {"sweep", sweep_beta},  {"format", format},
      {"complexity", complexity}};
  std::size_t failed = 0;
  for (const auto& [name, fn] : criteria) {
    if (!only.empty() && !only.count(name)) continue;
    Verdict v;
    try {
      v = fn();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    failed += !v.pass;
    std::cout << (v.pass ? "PASS " : "FAIL ") << name << ": " << v.detail << std::endl;
  }
  std::cout << (failed == 0 ? "all criteria passed" : fmt("%zu criteria failed", failed))
            << std::endl;
  return failed == 0 ? 0 : 1;
}
