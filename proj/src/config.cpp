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

#include "mimoe/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>

#include "mimoe/errors.hpp"

namespace mimoe {

namespace {

std::string_view trim(std::string_view s) {
  const auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

double parse_double(std::string_view key, std::string_view v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(out)) {
    throw ConfigError("invalid number for " + std::string(key) + ": '" + std::string(v) + "'");
  }
  return out;
}

std::uint64_t parse_uint(std::string_view key, std::string_view v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError("invalid unsigned integer for " + std::string(key) + ": '" +
                      std::string(v) + "'");
  }
  return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("invalid boolean for " + std::string(key) + ": '" + std::string(v) + "'");
}

std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(std::numeric_limits<double>::max_digits10) << v;
  return os.str();
}

using Setter = std::function<void(TrainConfig&, std::string_view, std::string_view)>;

const std::map<std::string, Setter, std::less<>>& setters() {
  static const auto* table = [] {
    auto* t = new std::map<std::string, Setter, std::less<>>;
    auto real = [t](const char* name, auto field) {
      (*t)[name] = [field](TrainConfig& c, std::string_view k, std::string_view v) {
        field(c) = parse_double(k, v);
      };
    };
    auto size = [t](const char* name, auto field) {
      (*t)[name] = [field](TrainConfig& c, std::string_view k, std::string_view v) {
        field(c) = static_cast<std::size_t>(parse_uint(k, v));
      };
    };
    real("alpha", [](TrainConfig& c) -> double& { return c.loss.alpha; });
    real("beta", [](TrainConfig& c) -> double& { return c.loss.beta; });
    real("eta", [](TrainConfig& c) -> double& { return c.loss.eta; });
    real("gamma", [](TrainConfig& c) -> double& { return c.loss.gamma; });
    real("theta_agr", [](TrainConfig& c) -> double& { return c.loss.thresholds.theta_agr; });
    real("theta_sem", [](TrainConfig& c) -> double& { return c.loss.thresholds.theta_sem; });
    real("lr_main", [](TrainConfig& c) -> double& { return c.lr_main; });
    real("lr_gate", [](TrainConfig& c) -> double& { return c.lr_gate; });
    real("weight_decay", [](TrainConfig& c) -> double& { return c.weight_decay; });
    real("holdout", [](TrainConfig& c) -> double& { return c.holdout; });
    size("batch_size", [](TrainConfig& c) -> std::size_t& { return c.batch_size; });
    size("epochs", [](TrainConfig& c) -> std::size_t& { return c.epochs; });
    size("eval_batch", [](TrainConfig& c) -> std::size_t& { return c.eval_batch; });
    size("d", [](TrainConfig& c) -> std::size_t& { return c.model.dim; });
    size("d_c", [](TrainConfig& c) -> std::size_t& { return c.model.clip_dim; });
    size("hidden", [](TrainConfig& c) -> std::size_t& { return c.model.hidden; });
    size("experts", [](TrainConfig& c) -> std::size_t& { return c.model.experts; });
    size("heads", [](TrainConfig& c) -> std::size_t& { return c.model.heads; });
    size("ff_ratio", [](TrainConfig& c) -> std::size_t& { return c.model.ff_ratio; });
    (*t)["seed"] = [](TrainConfig& c, std::string_view k, std::string_view v) {
      c.seed = parse_uint(k, v);
    };
    (*t)["model_seed"] = [](TrainConfig& c, std::string_view k, std::string_view v) {
      c.model.seed = parse_uint(k, v);
    };
    (*t)["detach_unimodal"] = [](TrainConfig& c, std::string_view k, std::string_view v) {
      c.loss.detach_unimodal = parse_bool(k, v);
    };
    (*t)["balance_mode"] = [](TrainConfig& c, std::string_view, std::string_view v) {
      if (v == "st_moe") {
        c.loss.balance = BalanceMode::kStMoe;
      } else if (v == "paper_literal") {
        c.loss.balance = BalanceMode::kPaperLiteral;
      } else {
        throw ConfigError("balance_mode must be st_moe or paper_literal, got '" +
                          std::string(v) + "'");
      }
    };
    (*t)["precision"] = [](TrainConfig& c, std::string_view, std::string_view v) {
      if (v == "double") {
        c.precision = Precision::kDouble;
      } else if (v == "single") {
        c.precision = Precision::kSingle;
      } else {
        throw ConfigError("precision must be double or single, got '" + std::string(v) + "'");
      }
    };
    (*t)["ablation"] = [](TrainConfig& c, std::string_view, std::string_view v) {
      c.loss.ablation = parse_ablation(v);
    };
    return t;
  }();
  return *table;
}

}  // namespace

std::string_view to_string(BalanceMode mode) {
  return mode == BalanceMode::kStMoe ? "st_moe" : "paper_literal";
}

std::string_view to_string(Precision precision) {
  return precision == Precision::kDouble ? "double" : "single";
}

void TrainConfig::validate(bool allow_zero_rates) const {
  const bool rates_ok = allow_zero_rates ? lr_main >= 0.0 && lr_gate >= 0.0
                                         : lr_main > 0.0 && lr_gate > 0.0;
  if (!rates_ok) throw ConfigError("learning rates must be > 0");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
  if (batch_size == 0 || eval_batch == 0) throw ConfigError("batch sizes must be >= 1");
  if (epochs == 0) throw ConfigError("epochs must be >= 1");
  if (!(holdout > 0.0 && holdout < 1.0)) throw ConfigError("holdout must lie in (0, 1)");
  if (!(loss.alpha >= 0.0) || !(loss.beta >= 0.0) || !(loss.eta >= 0.0) ||
      !(loss.gamma >= 0.0)) {
    throw ConfigError("loss weights must be >= 0");
  }
  if (precision == Precision::kSingle) {
    throw ConfigError("precision=single is not supported by this build; use double");
  }
  loss.thresholds.validate();
  model.validate();
}

void set_config_value(TrainConfig& cfg, std::string_view key, std::string_view value) {
  const auto& table = setters();
  const auto it = table.find(key);
  if (it == table.end()) throw ConfigError("unknown config key '" + std::string(key) + "'");
  it->second(cfg, key, value);
}

TrainConfig parse_config(std::string_view text) {
  TrainConfig cfg;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const std::size_t nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const std::size_t hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    }
    try {
      set_config_value(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return cfg;
}

TrainConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string to_text(const TrainConfig& c) {
  std::ostringstream os;
  auto kv = [&os](const char* k, const std::string& v) { os << k << " = " << v << '\n'; };
  kv("alpha", format_double(c.loss.alpha));
  kv("beta", format_double(c.loss.beta));
  kv("eta", format_double(c.loss.eta));
  kv("gamma", format_double(c.loss.gamma));
  kv("theta_agr", format_double(c.loss.thresholds.theta_agr));
  kv("theta_sem", format_double(c.loss.thresholds.theta_sem));
  kv("balance_mode", std::string(to_string(c.loss.balance)));
  kv("detach_unimodal", c.loss.detach_unimodal ? "true" : "false");
  kv("ablation", std::string(to_string(c.loss.ablation)));
  kv("lr_main", format_double(c.lr_main));
  kv("lr_gate", format_double(c.lr_gate));
  kv("weight_decay", format_double(c.weight_decay));
  kv("batch_size", std::to_string(c.batch_size));
  kv("epochs", std::to_string(c.epochs));
  kv("eval_batch", std::to_string(c.eval_batch));
  kv("holdout", format_double(c.holdout));
  kv("seed", std::to_string(c.seed));
  kv("precision", std::string(to_string(c.precision)));
  kv("d", std::to_string(c.model.dim));
  kv("d_c", std::to_string(c.model.clip_dim));
  kv("hidden", std::to_string(c.model.hidden));
  kv("experts", std::to_string(c.model.experts));
  kv("heads", std::to_string(c.model.heads));
  kv("ff_ratio", std::to_string(c.model.ff_ratio));
  kv("model_seed", std::to_string(c.model.seed));
  return os.str();
}

void adopt_bundle_dims(TrainConfig& cfg, const BundleHeader& header) {
  cfg.model.text_tokens = header.text_tokens;
  cfg.model.text_dim = header.text_dim;
  cfg.model.image_tokens = header.image_tokens;
  cfg.model.image_dim = header.image_dim;
  cfg.model.clip_raw_dim = header.clip_dim;
}

}  // namespace mimoe
