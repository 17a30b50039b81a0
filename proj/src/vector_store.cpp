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

#include "projann/vector_store.hpp"

#include <bit>
#include <cmath>
#include <limits>

namespace projann {

std::string StoreSpec::name() const {
  switch (kind) {
    case Kind::f32: return "f32";
    case Kind::f16: return "f16";
    case Kind::lvq:
      return "lvq" + std::to_string(b1) +
             (b2 == 0 ? std::string() : "x" + std::to_string(b2));
  }
  return "?";
}

StoreSpec StoreSpec::parse(const std::string& name) {
  if (name == "f32") return float32();
  if (name == "f16") return half();
  if (name == "lvq8") return lvq(8);
  if (name == "lvq4") return lvq(4);
  if (name == "lvq4x8") return lvq(4, 8);
  if (name == "lvq8x8") return lvq(8, 8);
  throw ValidationError("unknown store format '" + name + "'");
}

float round_to_half(float v) {
  if (!std::isfinite(v)) return v;
  constexpr float kHalfMax = 65504.0f;
  if (std::abs(v) >= kHalfMax) return std::copysign(kHalfMax, v);
  if (std::abs(v) < 6.103515625e-05f) {
    // subnormal half range: fixed spacing of 2^-24
    return std::ldexp(std::nearbyint(std::ldexp(v, 24)), -24);
  }
  // 23 -> 10 mantissa bits, round half to even
  auto bits = std::bit_cast<uint32_t>(v);
  const uint32_t lsb = (bits >> 13) & 1u;
  bits += 0x0fffu + lsb;
  bits &= ~0x1fffu;
  return std::bit_cast<float>(bits);
}

VectorStore VectorStore::encode(const FloatMatrix& data, const StoreSpec& spec) {
  if (!data.allFinite()) {
    throw ValidationError("vector store: non-finite input component");
  }
  if (spec.kind != StoreSpec::Kind::lvq) return from_floats(data, spec);

  LvqParts parts;
  parts.codec = fit_codec(data, spec.b1, spec.b2);
  const size_t n = static_cast<size_t>(data.rows());
  const size_t s1 = parts.codec.code1_bytes();
  const size_t s2 = parts.codec.code2_bytes();
  parts.codes1.assign(n * s1, 0);
  parts.codes2.assign(n * s2, 0);
  parts.lo.resize(n);
  parts.delta.resize(n);
  for (size_t i = 0; i < n; ++i) {
    encode_into(parts.codec, row(data, static_cast<Eigen::Index>(i)),
                parts.codes1.data() + i * s1,
                s2 ? parts.codes2.data() + i * s2 : nullptr, parts.lo[i],
                parts.delta[i]);
  }
  return from_lvq(std::move(parts));
}

VectorStore VectorStore::from_floats(FloatMatrix data, const StoreSpec& spec) {
  if (spec.kind == StoreSpec::Kind::lvq) {
    throw ValidationError("from_floats: LVQ spec needs encoded parts");
  }
  VectorStore s;
  s.spec_ = {spec.kind, 0, 0};
  s.count_ = static_cast<size_t>(data.rows());
  s.dim_ = static_cast<size_t>(data.cols());
  if (spec.kind == StoreSpec::Kind::f16) {
    data = data.unaryExpr([](float v) { return round_to_half(v); });
  }
  s.floats_ = std::move(data);
  return s;
}

VectorStore VectorStore::from_lvq(LvqParts parts) {
  const size_t n = parts.lo.size();
  const size_t s1 = parts.codec.code1_bytes();
  const size_t s2 = parts.codec.code2_bytes();
  if (parts.delta.size() != n || parts.codes1.size() != n * s1 ||
      parts.codes2.size() != n * s2 || parts.codec.mean.size() != parts.codec.dim) {
    throw ValidationError("from_lvq: inconsistent part sizes");
  }
  VectorStore s;
  s.spec_ = StoreSpec::lvq(parts.codec.b1, parts.codec.b2);
  s.count_ = n;
  s.dim_ = parts.codec.dim;
  s.stride1_ = s1;
  s.stride2_ = s2;
  s.lvq_ = std::move(parts);
  return s;
}

void VectorStore::decode(size_t i, std::span<float> out) const {
  if (out.size() != dim_) throw ValidationError("decode: output size mismatch");
  if (!is_lvq()) {
    for (size_t j = 0; j < dim_; ++j) {
      out[j] = floats_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }
    return;
  }
  const LvqCodec& c = lvq_.codec;
  const uint8_t* c1 = lvq_.codes1.data() + i * stride1_;
  const uint8_t* c2 = lvq_.codes2.data() + i * stride2_;
  const float lo = lvq_.lo[i];
  const float d1 = lvq_.delta[i];
  const float d2 = c.b2 ? d1 / static_cast<float>(c.max_code2() + 1) : 0.0f;
  for (size_t j = 0; j < dim_; ++j) {
    float v = c.mean[j] + lo + d1 * static_cast<float>(unpack_code(c1, j, c.b1));
    if (c.b2) {
      v += -0.5f * d1 + (static_cast<float>(unpack_code(c2, j, c.b2)) + 0.5f) * d2;
    }
    out[j] = v;
  }
}

std::vector<float> VectorStore::decode(size_t i) const {
  std::vector<float> out(dim_);
  decode(i, out);
  return out;
}

PreparedQuery VectorStore::prepare(std::span<const float> q, Metric metric) const {
  if (q.size() != dim_) {
    throw ValidationError("query dimension " + std::to_string(q.size()) +
                          " does not match store dimension " +
                          std::to_string(dim_));
  }
  PreparedQuery pq;
  pq.metric = metric;
  pq.q.assign(q.begin(), q.end());
  if (is_lvq()) {
    const auto& mean = lvq_.codec.mean;
    double dot = 0.0, sum = 0.0;
    for (size_t j = 0; j < dim_; ++j) {
      dot += static_cast<double>(q[j]) * mean[j];
      sum += q[j];
    }
    pq.q_dot_mean = static_cast<float>(dot);
    pq.q_sum = static_cast<float>(sum);
    if (metric == Metric::euclidean) {
      pq.centered.resize(dim_);
      for (size_t j = 0; j < dim_; ++j) pq.centered[j] = q[j] - mean[j];
    }
  }
  return pq;
}

float VectorStore::similarity(const PreparedQuery& pq, size_t i) const {
  if (!is_lvq()) {
    return exact_similarity(pq.metric, pq.q, row(floats_, static_cast<Eigen::Index>(i)));
  }
  const LvqCodec& c = lvq_.codec;
  const uint8_t* c1 = lvq_.codes1.data() + i * stride1_;
  const uint8_t* c2 = lvq_.codes2.data() + i * stride2_;
  const float lo = lvq_.lo[i];
  const float d1 = lvq_.delta[i];
  const float d2 = c.b2 ? d1 / static_cast<float>(c.max_code2() + 1) : 0.0f;

  if (pq.metric == Metric::inner_product) {
    const float* q = pq.q.data();
    float acc1 = 0.0f;
    if (c.b1 == 8) {
      for (size_t j = 0; j < dim_; ++j) acc1 += q[j] * static_cast<float>(c1[j]);
    } else {
      for (size_t j = 0; j < dim_; ++j) {
        acc1 += q[j] * static_cast<float>(unpack_code(c1, j, 4));
      }
    }
    float ip = pq.q_dot_mean + lo * pq.q_sum + d1 * acc1;
    if (c.b2) {
      float acc2 = 0.0f;
      for (size_t j = 0; j < dim_; ++j) acc2 += q[j] * static_cast<float>(c2[j]);
      ip += (-0.5f * d1 + 0.5f * d2) * pq.q_sum + d2 * acc2;
    }
    return ip;
  }

  const float* qc = pq.centered.data();
  float acc = 0.0f;
  if (c.b2) {
    const float base = lo - 0.5f * d1 + 0.5f * d2;
    for (size_t j = 0; j < dim_; ++j) {
      const float diff = qc[j] - base -
                         d1 * static_cast<float>(unpack_code(c1, j, c.b1)) -
                         d2 * static_cast<float>(c2[j]);
      acc += diff * diff;
    }
  } else {
    for (size_t j = 0; j < dim_; ++j) {
      const float diff = qc[j] - lo - d1 * static_cast<float>(unpack_code(c1, j, c.b1));
      acc += diff * diff;
    }
  }
  return -acc;
}

}  // namespace projann
