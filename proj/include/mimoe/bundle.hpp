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

// MIMB embedding bundles.
//
// Layout, all integers and floats little-endian:
//
//   header (32 bytes)
//     char[4] magic "MIMB"
//     u32     version            1, or 2 with per-record token counts
//     u32     n_samples
//     u32     text_tokens  (N_t)   u32 text_dim  (d_t_raw)
//     u32     image_tokens (N_i)   u32 image_dim (d_i_raw)
//     u32     clip_dim     (d_c_raw)
//   record, repeated n_samples times
//     u8      label              0 = real, 1 = fake
//     u8      interaction_truth  0..3, 255 = unknown
//     f32     text[N_t * d_t_raw]
//     f32     image[N_i * d_i_raw]
//     f32     clip_text[d_c_raw]
//     f32     clip_image[d_c_raw]
//     u16     text_valid, image_valid   (version 2 only)

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mimoe {

inline constexpr char kBundleMagic[4] = {'M', 'I', 'M', 'B'};
inline constexpr std::uint32_t kBundleVersion = 1;
inline constexpr std::uint32_t kBundleVersionTokenCounts = 2;
inline constexpr std::size_t kBundleHeaderSize = 32;
inline constexpr std::uint8_t kUnknownInteraction = 255;

enum class BundleErrc : int {
  kIo = 1,
  kBadMagic = 2,
  kUnsupportedVersion = 3,
  kInvalidHeader = 4,
  kTruncated = 5,
  kTrailingBytes = 6,
  kNonFinite = 7,
  kDimMismatch = 8,
  kInvalidLabel = 9,
  kZeroClip = 10,
};

const char* to_string(BundleErrc code);

class BundleError : public std::runtime_error {
 public:
  BundleError(BundleErrc code, const std::string& what,
              std::optional<std::size_t> record = std::nullopt);

  BundleErrc code() const noexcept { return code_; }
  /// Index of the offending record, when the error is record-specific.
  std::optional<std::size_t> record() const noexcept { return record_; }

 private:
  BundleErrc code_;
  std::optional<std::size_t> record_;
};

struct BundleHeader {
  std::uint32_t version = kBundleVersion;
  std::uint32_t n_samples = 0;
  std::uint32_t text_tokens = 8;
  std::uint32_t text_dim = 32;
  std::uint32_t image_tokens = 8;
  std::uint32_t image_dim = 32;
  std::uint32_t clip_dim = 16;

  std::size_t record_size() const;
  /// Throws BundleError(kUnsupportedVersion / kInvalidHeader).
  void validate() const;

  friend bool operator==(const BundleHeader&, const BundleHeader&) = default;
};

struct EmbeddingRecord {
  std::uint8_t label = 0;
  std::uint8_t interaction_truth = kUnknownInteraction;
  std::vector<float> text;        // N_t * d_t_raw, token-major
  std::vector<float> image;       // N_i * d_i_raw
  std::vector<float> clip_text;   // d_c_raw
  std::vector<float> clip_image;  // d_c_raw
  std::uint16_t text_valid = 0;   // version 2 only
  std::uint16_t image_valid = 0;

  friend bool operator==(const EmbeddingRecord&, const EmbeddingRecord&) = default;
};

struct Bundle {
  BundleHeader header;
  std::vector<EmbeddingRecord> records;
};

/// Validates every record against `header` (n_samples is taken from
/// records.size()) and returns the serialized bytes.
std::vector<std::uint8_t> encode_bundle(const BundleHeader& header,
                                        std::span<const EmbeddingRecord> records);
Bundle decode_bundle(std::span<const std::uint8_t> bytes);

void write_bundle(const std::filesystem::path& path, const BundleHeader& header,
                  std::span<const EmbeddingRecord> records);
Bundle read_bundle(const std::filesystem::path& path);

}  // namespace mimoe
