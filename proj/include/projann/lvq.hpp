// Copyright 2026 The projann Authors.
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

#include <cstdint>
#include <span>
#include <vector>

#include "projann/common.hpp"

namespace projann {

/// Locally-adaptive vector quantization parameters shared by a whole store.
///
/// Vectors are centered by the dataset mean; each centered vector then gets
/// its own [lo, hi] range split into 2^b1 uniform steps. With b2 = 8 the
/// first-level rounding residual, which lies in [-delta/2, delta/2], is
/// quantized again on a 2^b2-level uniform grid (midpoint reconstruction).
struct LvqCodec {
  size_t dim = 0;
  std::vector<float> mean;
  int b1 = 8;
  int b2 = 0;

  uint32_t max_code1() const { return (1u << b1) - 1; }
  uint32_t max_code2() const { return b2 == 0 ? 0 : (1u << b2) - 1; }
  size_t code1_bytes() const;
  size_t code2_bytes() const;
};

/// One encoded vector. codes1 holds b1-bit codes (4-bit codes two per byte,
/// low nibble first); codes2 is empty for one-level codecs.
struct LvqCode {
  std::vector<uint8_t> codes1;
  std::vector<uint8_t> codes2;
  float lo = 0.0f;
  float delta = 0.0f;
};

/// Bytes needed to pack `count` codes of `bits` bits (4 or 8).
size_t packed_size(size_t count, int bits);

/// Reads code j from a packed buffer.
inline uint32_t unpack_code(const uint8_t* packed, size_t j, int bits) {
  if (bits == 8) return packed[j];
  const uint8_t byte = packed[j >> 1];
  return (j & 1) ? (byte >> 4) : (byte & 0x0f);
}

inline void pack_code(uint8_t* packed, size_t j, int bits, uint32_t code) {
  if (bits == 8) {
    packed[j] = static_cast<uint8_t>(code);
    return;
  }
  uint8_t& byte = packed[j >> 1];
  if (j & 1) {
    byte = static_cast<uint8_t>((byte & 0x0f) | (code << 4));
  } else {
    byte = static_cast<uint8_t>((byte & 0xf0) | (code & 0x0f));
  }
}

/// Column mean of `vectors`; b1 must be 4 or 8 and b2 0 or 8.
LvqCodec fit_codec(const FloatMatrix& vectors, int b1, int b2);

/// Encodes into caller-owned buffers. codes1/codes2 must be zeroed and sized
/// code1_bytes()/code2_bytes().
void encode_into(const LvqCodec& codec, std::span<const float> x,
                 uint8_t* codes1, uint8_t* codes2, float& lo, float& delta);

LvqCode encode(const LvqCodec& codec, std::span<const float> x);

/// Reconstruction in double precision.
std::vector<double> decode(const LvqCodec& codec, const LvqCode& code);

/// <q, decode(code)> without materializing the decoded vector.
double inner_product_quantized(const LvqCodec& codec, const LvqCode& code,
                               std::span<const float> q);

}  // namespace projann
