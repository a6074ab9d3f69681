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

#include "mimoe/bundle.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "mimoe/byte_io.hpp"

namespace mimoe {

namespace byte_io {

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in),
                                   std::istreambuf_iterator<char>());
}

void write_file(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot create " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed for " + path);
}

}  // namespace byte_io

namespace {

void check_payload(std::span<const float> values, std::size_t expected, const char* field,
                   std::size_t index) {
  if (values.size() != expected) {
    throw BundleError(BundleErrc::kDimMismatch,
                      std::string(field) + " has " + std::to_string(values.size()) +
                          " values, header expects " + std::to_string(expected),
                      index);
  }
  for (float v : values) {
    if (!std::isfinite(v)) {
      throw BundleError(BundleErrc::kNonFinite, std::string(field) + " contains NaN/Inf",
                        index);
    }
  }
}

bool all_zero(std::span<const float> values) {
  for (float v : values) {
    if (v != 0.0f) return false;
  }
  return true;
}

void validate_record(const BundleHeader& h, const EmbeddingRecord& r, std::size_t index) {
  if (r.label > 1) {
    throw BundleError(BundleErrc::kInvalidLabel, "label must be 0 or 1", index);
  }
  if (r.interaction_truth > 3 && r.interaction_truth != kUnknownInteraction) {
    throw BundleError(BundleErrc::kInvalidLabel, "interaction_truth must be 0..3 or 255",
                      index);
  }
  check_payload(r.text, std::size_t{h.text_tokens} * h.text_dim, "text", index);
  check_payload(r.image, std::size_t{h.image_tokens} * h.image_dim, "image", index);
  check_payload(r.clip_text, h.clip_dim, "clip_text", index);
  check_payload(r.clip_image, h.clip_dim, "clip_image", index);
  if (all_zero(r.clip_text) || all_zero(r.clip_image)) {
    throw BundleError(BundleErrc::kZeroClip, "alignment vector is all zeros", index);
  }
  if (h.version == kBundleVersionTokenCounts &&
      (r.text_valid > h.text_tokens || r.image_valid > h.image_tokens)) {
    throw BundleError(BundleErrc::kDimMismatch, "valid token count exceeds header", index);
  }
}

void read_floats(byte_io::Reader& in, std::vector<float>& out, std::size_t n) {
  out.resize(n);
  for (float& v : out) v = in.f32();
}

}  // namespace

const char* to_string(BundleErrc code) {
  switch (code) {
    case BundleErrc::kIo: return "io";
    case BundleErrc::kBadMagic: return "bad_magic";
    case BundleErrc::kUnsupportedVersion: return "unsupported_version";
    case BundleErrc::kInvalidHeader: return "invalid_header";
    case BundleErrc::kTruncated: return "truncated";
    case BundleErrc::kTrailingBytes: return "trailing_bytes";
    case BundleErrc::kNonFinite: return "non_finite";
    case BundleErrc::kDimMismatch: return "dim_mismatch";
    case BundleErrc::kInvalidLabel: return "invalid_label";
    case BundleErrc::kZeroClip: return "zero_clip";
  }
  return "unknown";
}

BundleError::BundleError(BundleErrc code, const std::string& what,
                         std::optional<std::size_t> record)
    : std::runtime_error(std::string("MIMB ") + to_string(code) + ": " + what +
                         (record ? " (record " + std::to_string(*record) + ")" : "")),
      code_(code),
      record_(record) {}

std::size_t BundleHeader::record_size() const {
  std::size_t floats = std::size_t{text_tokens} * text_dim +
                       std::size_t{image_tokens} * image_dim + 2 * std::size_t{clip_dim};
  std::size_t size = 2 + 4 * floats;
  if (version == kBundleVersionTokenCounts) size += 4;
  return size;
}

void BundleHeader::validate() const {
  if (version != kBundleVersion && version != kBundleVersionTokenCounts) {
    throw BundleError(BundleErrc::kUnsupportedVersion,
                      "version " + std::to_string(version) + " is not supported");
  }
  if (text_tokens == 0 || text_dim == 0 || image_tokens == 0 || image_dim == 0 ||
      clip_dim == 0) {
    throw BundleError(BundleErrc::kInvalidHeader, "all dimensions must be >= 1");
  }
  if (version == kBundleVersionTokenCounts && (text_tokens > 0xFFFF || image_tokens > 0xFFFF)) {
    throw BundleError(BundleErrc::kInvalidHeader, "token counts exceed u16 range");
  }
}

std::vector<std::uint8_t> encode_bundle(const BundleHeader& header,
                                        std::span<const EmbeddingRecord> records) {
  BundleHeader h = header;
  h.n_samples = static_cast<std::uint32_t>(records.size());
  h.validate();
  byte_io::Writer out;
  out.bytes().reserve(kBundleHeaderSize + records.size() * h.record_size());
  out.raw(kBundleMagic);
  out.u32(h.version);
  out.u32(h.n_samples);
  out.u32(h.text_tokens);
  out.u32(h.text_dim);
  out.u32(h.image_tokens);
  out.u32(h.image_dim);
  out.u32(h.clip_dim);
  for (std::size_t i = 0; i < records.size(); ++i) {
    const EmbeddingRecord& r = records[i];
    validate_record(h, r, i);
    out.u8(r.label);
    out.u8(r.interaction_truth);
    for (float v : r.text) out.f32(v);
    for (float v : r.image) out.f32(v);
    for (float v : r.clip_text) out.f32(v);
    for (float v : r.clip_image) out.f32(v);
    if (h.version == kBundleVersionTokenCounts) {
      out.u16(r.text_valid);
      out.u16(r.image_valid);
    }
  }
  return std::move(out.bytes());
}

Bundle decode_bundle(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kBundleHeaderSize) {
    throw BundleError(BundleErrc::kTruncated, "file shorter than the header");
  }
  if (std::memcmp(bytes.data(), kBundleMagic, 4) != 0) {
    throw BundleError(BundleErrc::kBadMagic, "magic is not MIMB");
  }
  byte_io::Reader in(bytes.subspan(4));
  Bundle bundle;
  BundleHeader& h = bundle.header;
  h.version = in.u32();
  h.n_samples = in.u32();
  h.text_tokens = in.u32();
  h.text_dim = in.u32();
  h.image_tokens = in.u32();
  h.image_dim = in.u32();
  h.clip_dim = in.u32();
  h.validate();

  const std::size_t record_size = h.record_size();
  const std::size_t payload = bytes.size() - kBundleHeaderSize;
  const std::size_t expected = std::size_t{h.n_samples} * record_size;
  if (payload < expected) {
    throw BundleError(BundleErrc::kTruncated,
                      "expected " + std::to_string(expected) + " payload bytes, found " +
                          std::to_string(payload),
                      payload / record_size);
  }
  if (payload > expected) {
    throw BundleError(BundleErrc::kTrailingBytes,
                      std::to_string(payload - expected) + " bytes after the last record");
  }

  bundle.records.resize(h.n_samples);
  for (std::size_t i = 0; i < h.n_samples; ++i) {
    EmbeddingRecord& r = bundle.records[i];
    r.label = in.u8();
    r.interaction_truth = in.u8();
    read_floats(in, r.text, std::size_t{h.text_tokens} * h.text_dim);
    read_floats(in, r.image, std::size_t{h.image_tokens} * h.image_dim);
    read_floats(in, r.clip_text, h.clip_dim);
    read_floats(in, r.clip_image, h.clip_dim);
    if (h.version == kBundleVersionTokenCounts) {
      r.text_valid = in.u16();
      r.image_valid = in.u16();
    }
    validate_record(h, r, i);
  }
  return bundle;
}

void write_bundle(const std::filesystem::path& path, const BundleHeader& header,
                  std::span<const EmbeddingRecord> records) {
  std::vector<std::uint8_t> bytes = encode_bundle(header, records);
  try {
    byte_io::write_file(path.string(), bytes);
  } catch (const std::runtime_error& e) {
    throw BundleError(BundleErrc::kIo, e.what());
  }
}

Bundle read_bundle(const std::filesystem::path& path) {
  std::vector<std::uint8_t> bytes;
  try {
    bytes = byte_io::read_file(path.string());
  } catch (const std::runtime_error& e) {
    throw BundleError(BundleErrc::kIo, e.what());
  }
  return decode_bundle(bytes);
}

}  // namespace mimoe
