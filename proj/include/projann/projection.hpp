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
#include <limits>
#include <optional>
#include <string_view>
#include <utility>
#include <vector>

#include "projann/common.hpp"

namespace projann {

/// Second-order statistics used for training: k_q = sum q q^T over the
/// (normalized) training queries, k_x = sum x x^T over database vectors.
struct GramPair {
  Mat k_q;
  Mat k_x;
  size_t m = 0;  // query vectors accumulated
  size_t n = 0;  // database vectors accumulated
};

struct GramOptions {
  size_t max_database = 100000;
  size_t max_queries = 10000;
  // Rescale each query to squared norm 1/m before accumulating.
  bool normalize_queries = true;
  size_t workers = 1;
};

/// Row indices 0, s, 2s, ... with s = ceil(rows / limit).
std::vector<Eigen::Index> stride_sample(Eigen::Index rows, size_t limit);

/// Accumulates k_x from `data` and k_q from `queries` after uniform-stride
/// subsampling. Both sets must provide at least D vectors after sampling.
GramPair compute_grams(const FloatMatrix& data, const FloatMatrix& queries,
                       const GramOptions& options = {});

/// Query-side matrix a and database-side matrix b, both d x D. Search uses
/// <a q, b x> as the reduced-space inner product.
struct ProjectionPair {
  Mat a;
  Mat b;
  // Rows orthonormal (Stiefel) rather than merely inside the spectral ball.
  bool orthonormal = true;

  Eigen::Index d() const { return a.rows(); }
  Eigen::Index source_dim() const { return a.cols(); }
  bool shared() const { return a == b; }

  static ProjectionPair same(Mat m, bool orthonormal = true);
  static ProjectionPair identity(Eigen::Index dim);

  /// Checks shapes and Stiefel / hull membership; throws ValidationError.
  void validate() const;
};

struct FwConfig {
  double alpha = 0.75;
  int max_iters = 500;
  double rel_tol = 1e-3;
  // Polar retraction of a and b separately. Off by default: when a != b the
  // hull optimum can have singular values well below 1 and retracting each
  // factor on its own destroys the product a^T b.
  bool retract_output = false;
};

enum class Termination { tolerance, max_iters };

std::string_view to_string(Termination t);

struct ConvergenceReport {
  // losses[0] is the loss at the initial point, losses[t + 1] after
  // iteration t.
  std::vector<double> losses;
  std::vector<double> gaps_a;
  std::vector<double> gaps_b;
  std::vector<double> steps;
  int iterations_run = 0;
  Termination termination = Termination::max_iters;
  std::optional<double> loss_before_retraction;
  std::optional<double> loss_after_retraction;
};

struct FwResult {
  ProjectionPair pair;
  ConvergenceReport report;
};

struct EsResult {
  ProjectionPair pair;
  double beta = 1.0;
  // ood_loss of pair.
  double loss = 0.0;
  // eigsearch_loss at beta, the value the search minimized.
  double search_loss = 0.0;
};

/// PCA: a = b = the d leading eigenvectors of k_x as rows.
ProjectionPair train_id(const Mat& k_x, Eigen::Index d);

/// sum_i ||x_i - M^T M x_i||^2 = tr(k_x) - tr(M k_x M^T).
double reconstruction_loss(const Mat& m, const Mat& k_x);

/// tr(A Kq A^T B Kx B^T + Kq Kx - 2 Kq A^T B Kx).
double ood_loss(const Mat& a, const Mat& b, const GramPair& grams);
double ood_loss(const ProjectionPair& pair, const GramPair& grams);

/// Partial derivatives of ood_loss with respect to a and b.
std::pair<Mat, Mat> ood_gradients(const Mat& a, const Mat& b,
                                  const GramPair& grams);
std::pair<Mat, Mat> ood_gradients(const ProjectionPair& pair,
                                  const GramPair& grams);

struct FwGap {
  double a = 0.0;
  double b = 0.0;
};

/// Frank-Wolfe gaps <-grad, lmo(-grad) - z> for both blocks, evaluated at
/// the same point.
FwGap fw_gap(const ProjectionPair& pair, const GramPair& grams);

/// Block-coordinate Frank-Wolfe over the spectral-norm ball, starting from
/// a = b = 0 with step 1/(t+1)^alpha.
FwResult train_ood_fw(const GramPair& grams, Eigen::Index d,
                      const FwConfig& config = {});

/// Same, from a caller-chosen hull point.
FwResult train_ood_fw(const GramPair& grams, const ProjectionPair& start,
                      const FwConfig& config = {});

/// d leading eigenvectors of (1 - beta)/m Kq + beta/n Kx, as rows.
Mat eigsearch_projection(const GramPair& grams, Eigen::Index d, double beta);

/// The shared-projection loss with both Grams sample-normalized:
/// tr(P Kq' P^T P Kx' P^T) - 2 tr(Kq' P^T P Kx'), Kq' = Kq/m, Kx' = Kx/n.
double eigsearch_loss(const Mat& p, const GramPair& grams);

/// Minimizes eigsearch_loss over beta in [0, 1] (Brent, with explicit
/// evaluation at 0, 0.5 and 1).
EsResult train_ood_es(const GramPair& grams, Eigen::Index d);

/// Symmetric, finite, PSD and non-empty sample counts.
void validate_grams(const GramPair& grams);

}  // namespace projann
