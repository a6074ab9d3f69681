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

#include "mimoe/checkpoint.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "mimoe/byte_io.hpp"

namespace mimoe {

namespace {

std::array<std::size_t*, 12> model_fields(ModelConfig& c) {
  return {&c.text_tokens, &c.text_dim,   &c.image_tokens, &c.image_dim,
          &c.clip_raw_dim, &c.dim,       &c.clip_dim,     &c.hidden,
          &c.experts,      &c.heads,     &c.ff_ratio,     nullptr};
}

class Cursor {
 public:
  explicit Cursor(std::span<const std::uint8_t> bytes) : reader_(bytes) {}

  void need(std::size_t n, const char* what) {
    if (reader_.remaining() < n) {
      throw CheckpointError(std::string("checkpoint truncated while reading ") + what);
    }
  }
  std::uint32_t u32(const char* what) { need(4, what); return reader_.u32(); }
  std::uint64_t u64(const char* what) { need(8, what); return reader_.u64(); }
  double f64(const char* what) { need(8, what); return reader_.f64(); }
  std::string str(const char* what) {
    const std::uint32_t n = u32(what);
    need(n, what);
    return reader_.chars(n);
  }
  std::string chars(std::size_t n, const char* what) { need(n, what); return reader_.chars(n); }
  std::size_t remaining() const { return reader_.remaining(); }

 private:
  byte_io::Reader reader_;
};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const MimoeModel& model, const TrainConfig& cfg) {
  byte_io::Writer w;
  w.raw(kCheckpointMagic);
  w.u32(kCheckpointVersion);
  ModelConfig mc = model.config();
  for (std::size_t* f : model_fields(mc)) {
    if (f) w.u64(*f);
  }
  w.u64(mc.seed);
  w.str(to_text(cfg));
  const ParameterList params = model.parameters();
  w.u32(static_cast<std::uint32_t>(params.size()));
  for (const NamedParameter& p : params) {
    w.str(p.name);
    w.u32(static_cast<std::uint32_t>(p.tensor.rank()));
    for (std::size_t d : p.tensor.shape()) w.u64(d);
    for (double v : p.tensor.data()) w.f64(v);
  }
  return std::move(w.bytes());
}

LoadedCheckpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  Cursor in(bytes);
  if (in.chars(4, "magic") != std::string(kCheckpointMagic, 4)) {
    throw CheckpointError("not a checkpoint (bad magic)");
  }
  if (const std::uint32_t v = in.u32("version"); v != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(v));
  }
  ModelConfig mc;
  for (std::size_t* f : model_fields(mc)) {
    if (f) *f = static_cast<std::size_t>(in.u64("model config"));
  }
  mc.seed = in.u64("model config");
  TrainConfig cfg = parse_config(in.str("training config"));
  cfg.model = mc;

  LoadedCheckpoint out{cfg, MimoeModel(mc)};
  std::map<std::string, Tensor> by_name;
  for (const NamedParameter& p : out.model.parameters()) by_name.emplace(p.name, p.tensor);

  const std::uint32_t count = in.u32("parameter count");
  if (count != by_name.size()) {
    throw CheckpointError("checkpoint has " + std::to_string(count) + " parameters, model has " +
                          std::to_string(by_name.size()));
  }
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = in.str("parameter name");
    const auto it = by_name.find(name);
    if (it == by_name.end()) throw CheckpointError("unknown parameter '" + name + "'");
    const std::uint32_t rank = in.u32("rank");
    Shape shape;
    for (std::uint32_t d = 0; d < rank && d < 8; ++d) shape.push_back(in.u64("shape"));
    if (shape != it->second.shape()) {
      throw CheckpointError("parameter '" + name + "' has shape " + to_string(shape) +
                            ", model expects " + to_string(it->second.shape()));
    }
    auto values = it->second.mutable_data();
    in.need(values.size() * 8, "parameter values");
    for (double& v : values) {
      v = in.f64("parameter values");
      if (!std::isfinite(v)) throw CheckpointError("non-finite value in '" + name + "'");
    }
    by_name.erase(it);
  }
  if (in.remaining() != 0) throw CheckpointError("trailing bytes after checkpoint");
  return out;
}

void save_checkpoint(const std::filesystem::path& path, const MimoeModel& model,
                     const TrainConfig& cfg) {
  const std::vector<std::uint8_t> bytes = encode_checkpoint(model, cfg);
  try {
    byte_io::write_file(path.string(), bytes);
  } catch (const std::runtime_error& e) {
    throw CheckpointError(e.what());
  }
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::vector<std::uint8_t> bytes;
  try {
    bytes = byte_io::read_file(path.string());
  } catch (const std::runtime_error& e) {
    throw CheckpointError(e.what());
  }
  return decode_checkpoint(bytes);
}

}  // namespace mimoe
