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
#include <string>
#include <vector>

#include "projann/common.hpp"
#include "projann/lvq.hpp"

namespace projann {

/// How a store keeps its vectors.
struct StoreSpec {
  enum class Kind : uint8_t {
    f32 = 0,
    f16 = 1,  // f32 storage with mantissas rounded to half precision on write
    lvq = 2,
  };
  Kind kind = Kind::f32;
  int b1 = 8;
  int b2 = 0;

  static StoreSpec float32() { return {Kind::f32, 0, 0}; }
  static StoreSpec half() { return {Kind::f16, 0, 0}; }
  static StoreSpec lvq(int b1, int b2 = 0) { return {Kind::lvq, b1, b2}; }

  /// "f32", "f16", "lvq8", "lvq4", "lvq4x8", "lvq8x8".
  std::string name() const;
  static StoreSpec parse(const std::string& name);
  bool operator==(const StoreSpec&) const = default;
};

/// Rounds to the nearest value representable in IEEE half precision
/// (normal range only; magnitudes beyond it saturate).
float round_to_half(float v);

/// A query prepared once against a store so every per-vector score costs a
/// single pass over the code bytes.
struct PreparedQuery {
  Metric metric = Metric::inner_product;
  std::vector<float> q;
  std::vector<float> centered;  // q - codec mean (LVQ + euclidean only)
  float q_dot_mean = 0.0f;
  float q_sum = 0.0f;
};

/// Raw LVQ contents, used for persistence.
struct LvqParts {
  LvqCodec codec;
  std::vector<uint8_t> codes1;  // count * codec.code1_bytes()
  std::vector<uint8_t> codes2;  // count * codec.code2_bytes()
  std::vector<float> lo;
  std::vector<float> delta;
};

/// Fixed-size collection of equal-length vectors, either as floats or as
/// LVQ codes. Immutable after construction.
class VectorStore {
 public:
  VectorStore() = default;

  static VectorStore encode(const FloatMatrix& data, const StoreSpec& spec);
  static VectorStore from_floats(FloatMatrix data, const StoreSpec& spec);
  static VectorStore from_lvq(LvqParts parts);

  size_t size() const { return count_; }
  size_t dim() const { return dim_; }
  const StoreSpec& spec() const { return spec_; }
  bool is_lvq() const { return spec_.kind == StoreSpec::Kind::lvq; }

  void decode(size_t i, std::span<float> out) const;
  std::vector<float> decode(size_t i) const;

  PreparedQuery prepare(std::span<const float> q, Metric metric) const;

  /// Larger is better: inner product or negated squared distance between
  /// the prepared query and the stored (reconstructed) vector i.
  float similarity(const PreparedQuery& pq, size_t i) const;

  const FloatMatrix& floats() const { return floats_; }
  const LvqParts& lvq() const { return lvq_; }

 private:
  StoreSpec spec_;
  size_t count_ = 0;
  size_t dim_ = 0;
  FloatMatrix floats_;
  LvqParts lvq_;
  size_t stride1_ = 0;
  size_t stride2_ = 0;
};

}  // namespace projann
