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

#include "projann/common.hpp"

#include <cmath>

namespace projann {
namespace {

constexpr size_t kExactBlock = 512;

}  // namespace

std::string_view to_string(FormatErrc code) {
  switch (code) {
    case FormatErrc::truncated: return "truncated";
    case FormatErrc::inconsistent_dimension: return "inconsistent_dimension";
    case FormatErrc::zero_dimension: return "zero_dimension";
    case FormatErrc::bad_magic: return "bad_magic";
    case FormatErrc::version_mismatch: return "version_mismatch";
    case FormatErrc::checksum_mismatch: return "checksum_mismatch";
    case FormatErrc::corrupt: return "corrupt";
  }
  return "unknown";
}

std::string_view to_string(Metric metric) {
  return metric == Metric::inner_product ? "ip" : "l2";
}

float exact_similarity(Metric metric, std::span<const float> q,
                       std::span<const float> x) {
  if (q.size() != x.size()) {
    throw ValidationError("exact_similarity: dimension mismatch");
  }
  // float accumulation per block, blocks reduced in double
  double total = 0.0;
  for (size_t lo = 0; lo < q.size(); lo += kExactBlock) {
    const size_t hi = std::min(q.size(), lo + kExactBlock);
    float acc = 0.0f;
    if (metric == Metric::inner_product) {
      for (size_t j = lo; j < hi; ++j) acc += q[j] * x[j];
    } else {
      for (size_t j = lo; j < hi; ++j) {
        const float diff = q[j] - x[j];
        acc += diff * diff;
      }
    }
    total += acc;
  }
  const auto s = static_cast<float>(total);
  return metric == Metric::inner_product ? s : -s;
}

void normalize_rows(FloatMatrix& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const double norm = m.row(i).cast<double>().norm();
    if (norm > 0.0) m.row(i) = (m.row(i).cast<double>() / norm).cast<float>();
  }
}

}  // namespace projann
