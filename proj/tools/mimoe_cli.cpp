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

// Command-line front end: gen-data, train, eval, gradcheck, route-stats, sweep.
//
// Exit codes: 0 success, 1 check failed or internal error, 2 usage,
// 3 configuration error, 4 data error, 5 numeric fault.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mimoe/bundle.hpp"
#include "mimoe/checkpoint.hpp"
#include "mimoe/config.hpp"
#include "mimoe/errors.hpp"
#include "mimoe/gradcheck.hpp"
#include "mimoe/metrics.hpp"
#include "mimoe/synth.hpp"
#include "mimoe/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum Exit : int {
  kOk = 0,
  kFailed = 1,
  kUsage = 2,
  kConfig = 3,
  kData = 4,
  kNumeric = 5,
};

struct DataFiles {
  std::string data;
  std::string test;
};

struct Loaded {
  mimoe::BundleHeader header;
  std::vector<mimoe::EmbeddingRecord> train;
  std::vector<mimoe::EmbeddingRecord> test;
};

Loaded load_data(const DataFiles& files, const mimoe::TrainConfig& cfg) {
  mimoe::Bundle bundle = mimoe::read_bundle(files.data);
  Loaded out;
  out.header = bundle.header;
  if (!files.test.empty()) {
    mimoe::Bundle test = mimoe::read_bundle(files.test);
    if (test.header.text_dim != bundle.header.text_dim ||
        test.header.image_dim != bundle.header.image_dim ||
        test.header.clip_dim != bundle.header.clip_dim) {
      throw mimoe::ShapeError("test bundle dimensions differ from the training bundle");
    }
    out.train = std::move(bundle.records);
    out.test = std::move(test.records);
  } else {
    mimoe::HoldoutSplit split = mimoe::split_holdout(bundle.records, cfg.holdout, cfg.seed);
    out.train = std::move(split.train);
    out.test = std::move(split.test);
  }
  return out;
}

mimoe::TrainConfig config_from(const std::string& path, const std::vector<std::string>& sets) {
  mimoe::TrainConfig cfg = path.empty() ? mimoe::TrainConfig{} : mimoe::load_config(path);
  for (const std::string& kv : sets) {
    const std::size_t eq = kv.find('=');
    if (eq == std::string::npos) throw mimoe::ConfigError("--set expects key=value, got " + kv);
    mimoe::set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  return cfg;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

std::vector<std::uint32_t> counts_or(const std::vector<std::uint32_t>& v,
                                     std::array<std::uint32_t, 4> fallback) {
  if (v.empty()) return {fallback.begin(), fallback.end()};
  if (v.size() != 4) throw mimoe::ConfigError("counts need four values (DM,DA,AM,AA)");
  return v;
}

void print_routes(const mimoe::Metrics& m) {
  std::printf("expert  regime  dispatched  share   mean_delta  mean_rho  targeted\n");
  std::size_t total = 0;
  for (std::size_t k : m.routing) total += k;
  for (std::size_t k = 0; k < mimoe::kInteractionClasses; ++k) {
    std::printf("%6zu  %6s  %10zu  %5.3f  %10.4f  %8.4f  %8zu\n", k,
                std::string(mimoe::interaction_name(static_cast<int>(k))).c_str(), m.routing[k],
                total ? static_cast<double>(m.routing[k]) / static_cast<double>(total) : 0.0,
                m.mean_delta[k], m.mean_rho[k], m.targets[k]);
  }
  if (m.routing_agreement) {
    std::printf("agreement with generator truth: %.4f (targets: %.4f)\n", *m.routing_agreement,
                m.target_agreement.value_or(0.0));
    std::printf("truth \\ routed      DM      DA      AM      AA\n");
    for (std::size_t t = 0; t < mimoe::kInteractionClasses; ++t) {
      std::printf("%12s", std::string(mimoe::interaction_name(static_cast<int>(t))).c_str());
      for (std::size_t k : m.truth_routing[t]) std::printf("  %6zu", k);
      std::printf("\n");
    }
  }
  std::printf("agreement with routing targets: %.4f\n", m.routed_target_agreement);
}

std::vector<double> parse_values(const std::string& csv) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= csv.size()) {
    const std::size_t comma = csv.find(',', pos);
    const std::string item = csv.substr(pos, comma == std::string::npos ? std::string::npos
                                                                        : comma - pos);
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw mimoe::ConfigError("invalid sweep value '" + item + "'");
    }
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mimoe: interaction-aware mixture-of-experts fake news detector"};
  app.require_subcommand(1);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "write a synthetic MIMB bundle");
  mimoe::SynthConfig synth;
  std::string gen_out;
  std::string gen_test_out;
  std::vector<std::uint32_t> counts;
  std::vector<std::uint32_t> test_counts;
  gen->add_option("--out", gen_out, "training bundle path")->required();
  gen->add_option("--test-out", gen_test_out, "held-out bundle path");
  gen->add_option("--seed", synth.seed, "generator seed");
  gen->add_option("--counts", counts, "samples per regime DM,DA,AM,AA")->delimiter(',');
  gen->add_option("--test-counts", test_counts, "held-out samples per regime")->delimiter(',');
  gen->add_option("--p-text", synth.p_text, "text cue predictability");
  gen->add_option("--p-image", synth.p_image, "image cue predictability");
  gen->add_option("--rho-hi", synth.rho_hi, "alignment of aligned pairs");
  gen->add_option("--rho-lo", synth.rho_lo, "alignment of misaligned pairs");
  gen->add_option("--separation", synth.separation, "distance between class centers");
  gen->add_option("--noise", synth.noise, "token noise scale");

  // train
  auto* trn = app.add_subcommand("train", "train a model on a bundle");
  std::string config_path;
  std::vector<std::string> sets;
  DataFiles files;
  std::string out_dir;
  trn->add_option("--config", config_path, "key = value config file");
  trn->add_option("--set", sets, "override a config key (key=value)");
  trn->add_option("--data", files.data, "training bundle")->required();
  trn->add_option("--test", files.test, "held-out bundle (default: 10% split)");
  trn->add_option("--out-dir", out_dir, "output directory")->required();
  bool quiet = false;
  trn->add_flag("--quiet", quiet, "no per-epoch progress");

  // eval
  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint");
  std::string checkpoint;
  std::string eval_data;
  std::string eval_out;
  ev->add_option("--checkpoint", checkpoint, "MIMC checkpoint")->required();
  ev->add_option("--data", eval_data, "bundle to evaluate")->required();
  ev->add_option("--out", eval_out, "write metrics JSON here instead of stdout");

  // gradcheck
  auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient suite");
  std::string gc_out;
  gc->add_option("--out", gc_out, "write results JSON");

  // route-stats
  auto* rs = app.add_subcommand("route-stats", "per-expert routing report");
  rs->add_option("--checkpoint", checkpoint, "MIMC checkpoint")->required();
  rs->add_option("--data", eval_data, "bundle")->required();

  // sweep
  auto* sw = app.add_subcommand("sweep", "grid over beta or lr_gate");
  std::string sweep_param;
  std::string sweep_values;
  std::string sweep_out;
  sw->add_option("--config", config_path, "base config file");
  sw->add_option("--set", sets, "override a config key (key=value)");
  sw->add_option("--data", files.data, "training bundle")->required();
  sw->add_option("--test", files.test, "held-out bundle (default: 10% split)");
  sw->add_option("--param", sweep_param, "beta or lr_gate")->required();
  sw->add_option("--values", sweep_values, "comma separated values")->required();
  sw->add_option("--out", sweep_out, "CSV output (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*gen) {
      const auto c = counts_or(counts, synth.counts);
      std::copy(c.begin(), c.end(), synth.counts.begin());
      const auto tc = counts_or(test_counts, gen_test_out.empty()
                                                 ? std::array<std::uint32_t, 4>{0, 0, 0, 0}
                                                 : std::array<std::uint32_t, 4>{250, 250, 250, 250});
      std::copy(tc.begin(), tc.end(), synth.test_counts.begin());
      if (gen_test_out.empty() && !test_counts.empty()) {
        throw mimoe::ConfigError("--test-counts requires --test-out");
      }
      mimoe::SynthData data = mimoe::generate_synthetic(synth);
      mimoe::write_bundle(gen_out, data.header, data.train);
      if (!gen_test_out.empty()) mimoe::write_bundle(gen_test_out, data.header, data.test);
      return kOk;
    }

    if (*trn) {
      mimoe::TrainConfig cfg = config_from(config_path, sets);
      Loaded data = load_data(files, cfg);
      mimoe::adopt_bundle_dims(cfg, data.header);
      cfg.validate();
      fs::create_directories(out_dir);
      mimoe::MimoeModel model(cfg.model);
      std::ofstream csv(fs::path(out_dir) / "epochs.csv", std::ios::trunc);
      csv << mimoe::epoch_csv_header() << '\n';
      json epochs = json::array();
      mimoe::TrainResult result = mimoe::train(
          model, data.header, data.train, data.test, cfg, [&](const mimoe::EpochLog& log) {
            csv << mimoe::epoch_csv_row(log) << '\n' << std::flush;
            epochs.push_back({{"epoch", log.epoch},
                              {"train", mimoe::to_json(log.train)},
                              {"eval", mimoe::to_json(log.eval)},
                              {"seconds", log.seconds}});
            if (!quiet) {
              std::fprintf(stderr, "epoch %zu  loss %.4f  acc %.4f  (%.1fs)\n", log.epoch,
                           log.train.total, log.eval.accuracy, log.seconds);
            }
          });
      mimoe::save_checkpoint(fs::path(out_dir) / "model.mimc", model, cfg);
      json report = {{"config", mimoe::to_text(cfg)},
                     {"train_samples", data.train.size()},
                     {"eval_samples", data.test.size()},
                     {"best_epoch", result.best_epoch},
                     {"best", mimoe::to_json(result.best)},
                     {"final", mimoe::to_json(result.final)},
                     {"epochs", epochs}};
      write_text(fs::path(out_dir) / "metrics.json", report.dump(2) + "\n");
      std::printf("final accuracy %.4f, best %.4f at epoch %zu\n", result.final.accuracy,
                  result.best.accuracy, result.best_epoch);
      return kOk;
    }

    if (*ev || *rs) {
      mimoe::LoadedCheckpoint ck = mimoe::load_checkpoint(checkpoint);
      mimoe::Bundle bundle = mimoe::read_bundle(eval_data);
      mimoe::Metrics m = mimoe::evaluate(ck.model, bundle.header, bundle.records, ck.config.loss,
                                         ck.config.eval_batch);
      if (*rs) {
        print_routes(m);
        return kOk;
      }
      const std::string text = mimoe::to_json(m).dump(2) + "\n";
      if (eval_out.empty()) {
        std::fputs(text.c_str(), stdout);
      } else {
        write_text(eval_out, text);
      }
      return kOk;
    }

    if (*gc) {
      std::vector<mimoe::GradCheckResult> results = mimoe::gradient_suite();
      bool all = true;
      json out = json::array();
      for (const auto& r : results) {
        all = all && r.passed();
        std::printf("%-4s %-36s entries %6zu  skipped %3zu  max rel err %.3e  (tol %.0e)\n",
                    r.passed() ? "ok" : "FAIL", r.name.c_str(), r.checked, r.skipped,
                    r.max_rel_error, r.tolerance);
        out.push_back({{"name", r.name},
                       {"passed", r.passed()},
                       {"checked", r.checked},
                       {"skipped", r.skipped},
                       {"max_rel_error", r.max_rel_error},
                       {"max_abs_error", r.max_abs_error},
                       {"tolerance", r.tolerance}});
      }
      if (!gc_out.empty()) write_text(gc_out, out.dump(2) + "\n");
      return all ? kOk : kFailed;
    }

    if (*sw) {
      mimoe::TrainConfig cfg = config_from(config_path, sets);
      const mimoe::SweepParam param = mimoe::parse_sweep_param(sweep_param);
      const std::vector<double> values = parse_values(sweep_values);
      Loaded data = load_data(files, cfg);
      mimoe::adopt_bundle_dims(cfg, data.header);
      cfg.validate();
      std::ofstream file;
      if (!sweep_out.empty()) {
        file.open(sweep_out, std::ios::trunc);
        if (!file) throw std::runtime_error("cannot write " + sweep_out);
      }
      std::ostream& os = sweep_out.empty() ? std::cout : file;
      os << mimoe::to_string(param)
         << ",final_accuracy,best_accuracy,best_epoch,fake_f1,real_f1,routing_agreement,"
            "min_routing_share\n";
      os.precision(10);
      mimoe::sweep(cfg, param, values, data.header, data.train, data.test,
                   [&](const mimoe::SweepRow& row) {
                     os << row.value << ',' << row.final.accuracy << ',' << row.best.accuracy
                        << ',' << row.best_epoch << ',' << row.final.fake.f1 << ','
                        << row.final.real.f1 << ',';
                     if (row.final.routing_agreement) os << *row.final.routing_agreement;
                     os << ',' << mimoe::min_routing_share(row.final) << '\n' << std::flush;
                   });
      return kOk;
    }
  } catch (const mimoe::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfig;
  } catch (const mimoe::BundleError& e) {
    std::fprintf(stderr, "data error (%s): %s\n", mimoe::to_string(e.code()), e.what());
    return kData;
  } catch (const mimoe::CheckpointError& e) {
    std::fprintf(stderr, "checkpoint error: %s\n", e.what());
    return kData;
  } catch (const mimoe::SynthError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfig;
  } catch (const mimoe::ShapeError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kData;
  } catch (const mimoe::DomainError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kData;
  } catch (const mimoe::NumericFault& e) {
    std::fprintf(stderr, "numeric fault: %s\n", e.what());
    return kNumeric;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kFailed;
  }
  return kFailed;
}
