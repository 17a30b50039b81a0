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

#include "projann/lvq.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace projann {
namespace {

void check_bits(int b1, int b2) {
  if (b1 != 4 && b1 != 8) {
    throw ValidationError("lvq: b1 must be 4 or 8, got " + std::to_string(b1));
  }
  if (b2 != 0 && b2 != 8) {
    throw ValidationError("lvq: b2 must be 0 or 8, got " + std::to_string(b2));
  }
}

void check_dim(const LvqCodec& codec, size_t n, const char* what) {
  if (n != codec.dim) {
    throw ValidationError(std::string(what) + ": dimension " +
                          std::to_string(n) + " does not match codec " +
                          std::to_string(codec.dim));
  }
}

// Largest float not above v.
float float_floor(double v) {
  auto f = static_cast<float>(v);
  if (static_cast<double>(f) > v) {
    f = std::nextafter(f, -std::numeric_limits<float>::infinity());
  }
  return f;
}

}  // namespace

size_t packed_size(size_t count, int bits) {
  return bits == 4 ? (count + 1) / 2 : count * static_cast<size_t>(bits / 8);
}

size_t LvqCodec::code1_bytes() const { return packed_size(dim, b1); }

size_t LvqCodec::code2_bytes() const {
  return b2 == 0 ? 0 : packed_size(dim, b2);
}

LvqCodec fit_codec(const FloatMatrix& vectors, int b1, int b2) {
  check_bits(b1, b2);
  if (vectors.rows() == 0 || vectors.cols() == 0) {
    throw ValidationError("fit_codec: empty input");
  }
  if (!vectors.allFinite()) {
    throw ValidationError("fit_codec: non-finite input component");
  }
  LvqCodec codec;
  codec.dim = static_cast<size_t>(vectors.cols());
  codec.b1 = b1;
  codec.b2 = b2;
  codec.mean.resize(codec.dim);
  for (Eigen::Index j = 0; j < vectors.cols(); ++j) {
    codec.mean[static_cast<size_t>(j)] =
        static_cast<float>(vectors.col(j).cast<double>().mean());
  }
  return codec;
}

void encode_into(const LvqCodec& codec, std::span<const float> x,
                 uint8_t* codes1, uint8_t* codes2, float& lo, float& delta) {
  check_dim(codec, x.size(), "encode");
  std::vector<double> r(codec.dim);
  double rmin = std::numeric_limits<double>::infinity();
  double rmax = -rmin;
  for (size_t j = 0; j < codec.dim; ++j) {
    if (!std::isfinite(x[j])) {
      throw ValidationError("encode: non-finite component at index " +
                            std::to_string(j));
    }
    r[j] = static_cast<double>(x[j]) - static_cast<double>(codec.mean[j]);
    rmin = std::min(rmin, r[j]);
    rmax = std::max(rmax, r[j]);
  }

  lo = float_floor(rmin);
  const double steps = codec.max_code1();
  if (rmax == rmin && static_cast<double>(lo) == rmin) {
    delta = 0.0f;
    return;
  }
  // Round the step up until the top code covers rmax, so every residual lies
  // inside the representable range and rounding error stays within delta/2.
  delta = static_cast<float>((rmax - lo) / steps);
  while (static_cast<double>(lo) + steps * delta < rmax) {
    delta = std::nextafter(delta, std::numeric_limits<float>::infinity());
  }
  const double d1 = delta;
  const double d2 = codec.b2 == 0 ? 0.0 : d1 / (codec.max_code2() + 1.0);
  for (size_t j = 0; j < codec.dim; ++j) {
    const double scaled = (r[j] - lo) / d1;
    const auto c1 = static_cast<uint32_t>(
        std::clamp(std::round(scaled), 0.0, steps));
    pack_code(codes1, j, codec.b1, c1);
    if (codec.b2 != 0) {
      const double residual = r[j] - (lo + c1 * d1);
      const double bin = std::floor((residual + 0.5 * d1) / d2);
      const auto c2 = static_cast<uint32_t>(
          std::clamp(bin, 0.0, static_cast<double>(codec.max_code2())));
      pack_code(codes2, j, codec.b2, c2);
    }
  }
}

LvqCode encode(const LvqCodec& codec, std::span<const float> x) {
  LvqCode code;
  code.codes1.assign(codec.code1_bytes(), 0);
  code.codes2.assign(codec.code2_bytes(), 0);
  encode_into(codec, x, code.codes1.data(), code.codes2.data(), code.lo,
              code.delta);
  return code;
}

std::vector<double> decode(const LvqCodec& codec, const LvqCode& code) {
  if (code.codes1.size() != codec.code1_bytes() ||
      code.codes2.size() != codec.code2_bytes()) {
    throw ValidationError("decode: code size does not match codec dimension");
  }
  const double d1 = code.delta;
  const double d2 = codec.b2 == 0 ? 0.0 : d1 / (codec.max_code2() + 1.0);
  std::vector<double> out(codec.dim);
  for (size_t j = 0; j < codec.dim; ++j) {
    double v = static_cast<double>(codec.mean[j]) + code.lo +
               unpack_code(code.codes1.data(), j, codec.b1) * d1;
    if (codec.b2 != 0) {
      v += -0.5 * d1 + (unpack_code(code.codes2.data(), j, codec.b2) + 0.5) * d2;
    }
    out[j] = v;
  }
  return out;
}

double inner_product_quantized(const LvqCodec& codec, const LvqCode& code,
                               std::span<const float> q) {
  check_dim(codec, q.size(), "inner_product_quantized");
  if (code.codes1.size() != codec.code1_bytes() ||
      code.codes2.size() != codec.code2_bytes()) {
    throw ValidationError(
        "inner_product_quantized: code size does not match codec dimension");
  }
  double q_mean = 0.0, q_sum = 0.0, q_c1 = 0.0, q_c2 = 0.0;
  for (size_t j = 0; j < codec.dim; ++j) {
    if (!std::isfinite(q[j])) {
      throw ValidationError("inner_product_quantized: non-finite query");
    }
    q_mean += static_cast<double>(q[j]) * codec.mean[j];
    q_sum += q[j];
    q_c1 += static_cast<double>(q[j]) *
            unpack_code(code.codes1.data(), j, codec.b1);
    if (codec.b2 != 0) {
      q_c2 += static_cast<double>(q[j]) *
              unpack_code(code.codes2.data(), j, codec.b2);
    }
  }
  const double d1 = code.delta;
  double ip = q_mean + code.lo * q_sum + d1 * q_c1;
  if (codec.b2 != 0) {
    const double d2 = d1 / (codec.max_code2() + 1.0);
    ip += (-0.5 * d1 + 0.5 * d2) * q_sum + d2 * q_c2;
  }
  return ip;
}

}  // namespace projann
