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

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace projann {

/// Thrown when caller-supplied data or parameters violate a precondition.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown on filesystem failures (open, short write, fsync).
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class FormatErrc {
  truncated,
  inconsistent_dimension,
  zero_dimension,
  bad_magic,
  version_mismatch,
  checksum_mismatch,
  corrupt,
};

std::string_view to_string(FormatErrc code);

/// A file was readable but its contents are malformed.
class FormatError : public IoError {
 public:
  FormatError(FormatErrc code, const std::string& what)
      : IoError(what), code_(code) {}
  FormatErrc code() const noexcept { return code_; }

 private:
  FormatErrc code_;
};

/// Dense double-precision matrix used by training code.
using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

/// Row-major float matrix; each row is one vector. Datasets, queries and
/// uncompressed stores use this layout so rows can be handed out as spans.
using FloatMatrix =
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline std::span<const float> row(const FloatMatrix& m, Eigen::Index i) {
  return {m.data() + i * m.cols(), static_cast<size_t>(m.cols())};
}

enum class Metric : uint8_t { inner_product = 0, euclidean = 1 };

std::string_view to_string(Metric metric);

/// Similarity where larger is better: the inner product, or the negated
/// squared Euclidean distance. Used for brute force and for re-ranking so
/// both paths produce bit-identical scores.
float exact_similarity(Metric metric, std::span<const float> q,
                       std::span<const float> x);

/// Scales every row to unit norm (zero rows are left alone). Cosine
/// similarity is served as inner product over normalized vectors.
void normalize_rows(FloatMatrix& m);

}  // namespace projann
