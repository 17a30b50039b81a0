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

#include <span>

#include "projann/common.hpp"

// Small dense kernels for projection training. Everything here works in
// double precision on D x D or d x D matrices (D up to about a thousand).
namespace projann::linalg {

/// Eigendecomposition of a symmetric matrix. values are sorted descending
/// and column j of vectors belongs to values[j].
struct EigenResult {
  Vec values;
  Mat vectors;
};

/// Thin SVD of a d x D matrix (d <= D): c = u * diag(s) * v^T with u d x d,
/// v D x d, s descending.
struct SvdResult {
  Mat u;
  Vec s;
  Mat v;
};

/// Output of the spectral-norm linear maximization oracle.
struct LmoResult {
  Mat s;
  // Set when the input was the zero matrix and s is the truncated identity.
  bool degenerate = false;
};

/// Sum of x_i x_i^T over the rows of vectors, accumulated in double.
///
/// Rows are split into `workers` contiguous ranges; each range is reduced by
/// a pairwise tree over fixed-size chunks and the range results are merged
/// pairwise. Results are bit-identical for a fixed worker count.
Mat accumulate_gram(const FloatMatrix& vectors, size_t workers = 1);

/// Weighted variant: sum of w_i x_i x_i^T. weights.size() must equal the
/// number of rows.
Mat accumulate_gram(const FloatMatrix& vectors, std::span<const double> weights,
                    size_t workers = 1);

/// Cyclic Jacobi eigensolver. Rejects matrices whose asymmetry exceeds
/// 1e-9 * max|k|.
EigenResult sym_eig(const Mat& k);

/// SVD through the eigendecomposition of c c^T. Right singular vectors for
/// singular values below 1e-10 * s_max are completed by Gram-Schmidt.
SvdResult thin_svd(const Mat& c);

/// argmax over ||S||_op <= 1 of <S, c>, which is u v^T from thin_svd(c).
LmoResult spectral_lmo(const Mat& c);

/// Nearest row-orthonormal matrix (polar factor). Throws ValidationError if
/// a does not have full row rank.
Mat stiefel_retract(const Mat& a);

/// Largest singular value.
double op_norm(const Mat& a);

/// max |a a^T - I|.
double orthonormality_error(const Mat& a);

/// [I_d | 0], the d x D truncated identity.
Mat truncated_identity(Eigen::Index d, Eigen::Index big_d);

}  // namespace projann::linalg
