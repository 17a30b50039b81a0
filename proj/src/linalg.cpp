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

#include "projann/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <thread>
#include <vector>

namespace projann::linalg {
namespace {

constexpr Eigen::Index kGramChunkRows = 512;
constexpr int kMaxJacobiSweeps = 100;

void require_finite(const Mat& m, const char* what) {
  if (!m.allFinite()) {
    throw ValidationError(std::string(what) + ": non-finite entry");
  }
}

Mat chunk_gram(const FloatMatrix& vectors, std::span<const double> weights,
               Eigen::Index begin, Eigen::Index end) {
  Mat block = vectors.middleRows(begin, end - begin).cast<double>();
  if (!weights.empty()) {
    for (Eigen::Index i = 0; i < block.rows(); ++i) {
      block.row(i) *= std::sqrt(weights[static_cast<size_t>(begin + i)]);
    }
  }
  Mat g = Mat::Zero(vectors.cols(), vectors.cols());
  g.selfadjointView<Eigen::Lower>().rankUpdate(block.transpose());
  return g;
}

// Pairwise reduction over chunks of [begin, end). A binary-counter stack
// keeps at most log2(chunks) partial sums alive.
Mat range_gram(const FloatMatrix& vectors, std::span<const double> weights,
               Eigen::Index begin, Eigen::Index end) {
  struct Partial {
    Mat sum;
    int level;
  };
  std::vector<Partial> stack;
  for (Eigen::Index lo = begin; lo < end; lo += kGramChunkRows) {
    Eigen::Index hi = std::min(end, lo + kGramChunkRows);
    Partial p{chunk_gram(vectors, weights, lo, hi), 0};
    while (!stack.empty() && stack.back().level == p.level) {
      p.sum = stack.back().sum + p.sum;
      ++p.level;
      stack.pop_back();
    }
    stack.push_back(std::move(p));
  }
  Mat total = Mat::Zero(vectors.cols(), vectors.cols());
  for (auto it = stack.rbegin(); it != stack.rend(); ++it) {
    total = it->sum + total;
  }
  return total;
}

Mat gram_impl(const FloatMatrix& vectors, std::span<const double> weights,
              size_t workers) {
  if (vectors.rows() < 1) {
    throw ValidationError("accumulate_gram: need at least one vector");
  }
  if (!vectors.allFinite()) {
    throw ValidationError("accumulate_gram: non-finite input component");
  }
  if (!weights.empty() &&
      weights.size() != static_cast<size_t>(vectors.rows())) {
    throw ValidationError("accumulate_gram: weight count != row count");
  }
  const Eigen::Index n = vectors.rows();
  workers = std::clamp<size_t>(workers, 1, static_cast<size_t>(n));

  std::vector<Mat> parts(workers);
  auto work = [&](size_t w) {
    Eigen::Index lo = n * static_cast<Eigen::Index>(w) /
                      static_cast<Eigen::Index>(workers);
    Eigen::Index hi = n * static_cast<Eigen::Index>(w + 1) /
                      static_cast<Eigen::Index>(workers);
    parts[w] = range_gram(vectors, weights, lo, hi);
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::jthread> threads;
    for (size_t w = 0; w < workers; ++w) threads.emplace_back(work, w);
  }
  for (size_t stride = 1; stride < parts.size(); stride *= 2) {
    for (size_t i = 0; i + stride < parts.size(); i += 2 * stride) {
      parts[i] += parts[i + stride];
    }
  }
  Mat g = std::move(parts[0]);
  g.triangularView<Eigen::StrictlyUpper>() = g.transpose();
  return g;
}

// Gram-Schmidt (two passes) on the columns of v in order. Columns flagged in
// `replace` are rebuilt from the canonical basis vector with the largest
// component orthogonal to the columns before it.
void orthonormalize_columns(Mat& v, const std::vector<bool>& replace) {
  const Eigen::Index rows = v.rows();
  for (Eigen::Index j = 0; j < v.cols(); ++j) {
    if (replace[static_cast<size_t>(j)]) {
      Eigen::Index best = 0;
      double best_norm = -1.0;
      for (Eigen::Index e = 0; e < rows; ++e) {
        // Residual norm^2 of e_e against earlier columns: 1 - sum v(e,i)^2.
        double r = 1.0 - v.row(e).head(j).squaredNorm();
        if (r > best_norm + 1e-12) {
          best_norm = r;
          best = e;
        }
      }
      v.col(j).setZero();
      v(best, j) = 1.0;
    }
    for (int pass = 0; pass < 2; ++pass) {
      for (Eigen::Index i = 0; i < j; ++i) {
        v.col(j) -= v.col(i).dot(v.col(j)) * v.col(i);
      }
    }
    v.col(j).normalize();
  }
}

}  // namespace

Mat accumulate_gram(const FloatMatrix& vectors, size_t workers) {
  return gram_impl(vectors, {}, workers);
}

Mat accumulate_gram(const FloatMatrix& vectors, std::span<const double> weights,
                    size_t workers) {
  return gram_impl(vectors, weights, workers);
}

EigenResult sym_eig(const Mat& k) {
  if (k.rows() != k.cols() || k.rows() < 1) {
    throw ValidationError("sym_eig: expected a non-empty square matrix");
  }
  require_finite(k, "sym_eig");
  const double scale = k.cwiseAbs().maxCoeff();
  const double asym = (k - k.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-9 * scale) {
    throw ValidationError("sym_eig: matrix is not symmetric (max asymmetry " +
                          std::to_string(asym) + ")");
  }

  const Eigen::Index n = k.rows();
  Mat a = 0.5 * (k + k.transpose());
  Mat v = Mat::Identity(n, n);
  const double tol = 1e-15 * a.norm();

  for (int sweep = 0; sweep < kMaxJacobiSweeps; ++sweep) {
    double off = 0.0;
    for (Eigen::Index q = 1; q < n; ++q) {
      for (Eigen::Index p = 0; p < q; ++p) off += a(p, q) * a(p, q);
    }
    if (std::sqrt(2.0 * off) <= tol) break;

    for (Eigen::Index p = 0; p < n - 1; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double tau = (a(q, q) - a(p, p)) / (2.0 * apq);
        double t;
        if (std::abs(tau) > 1e150) {
          t = 0.5 / tau;
        } else {
          t = (tau >= 0 ? 1.0 : -1.0) /
              (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        }
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;

        double* cp = a.col(p).data();
        double* cq = a.col(q).data();
        for (Eigen::Index i = 0; i < n; ++i) {
          const double x = cp[i], y = cq[i];
          cp[i] = c * x - s * y;
          cq[i] = s * x + c * y;
        }
        for (Eigen::Index i = 0; i < n; ++i) {
          const double x = a(p, i), y = a(q, i);
          a(p, i) = c * x - s * y;
          a(q, i) = s * x + c * y;
        }
        double* vp = v.col(p).data();
        double* vq = v.col(q).data();
        for (Eigen::Index i = 0; i < n; ++i) {
          const double x = vp[i], y = vq[i];
          vp[i] = c * x - s * y;
          vq[i] = s * x + c * y;
        }
      }
    }
  }

  std::vector<Eigen::Index> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index x, Eigen::Index y) {
                     return a(x, x) > a(y, y);
                   });
  EigenResult out{Vec(n), Mat(n, n)};
  for (Eigen::Index j = 0; j < n; ++j) {
    out.values[j] = a(order[static_cast<size_t>(j)], order[static_cast<size_t>(j)]);
    out.vectors.col(j) = v.col(order[static_cast<size_t>(j)]);
  }
  return out;
}

SvdResult thin_svd(const Mat& c) {
  if (c.rows() > c.cols()) {
    throw ValidationError("thin_svd: expected d <= D, got " +
                          std::to_string(c.rows()) + " x " +
                          std::to_string(c.cols()));
  }
  if (c.rows() < 1) throw ValidationError("thin_svd: empty matrix");
  require_finite(c, "thin_svd");

  const Eigen::Index d = c.rows();
  Mat g = c * c.transpose();
  g.triangularView<Eigen::StrictlyUpper>() = g.transpose();
  EigenResult eig = sym_eig(g);

  SvdResult out{eig.vectors, Vec(d), Mat(c.cols(), d)};
  for (Eigen::Index j = 0; j < d; ++j) {
    out.s[j] = std::sqrt(std::max(eig.values[j], 0.0));
  }
  const double cutoff = 1e-10 * out.s[0];
  std::vector<bool> replace(static_cast<size_t>(d));
  for (Eigen::Index j = 0; j < d; ++j) {
    if (out.s[j] > cutoff && out.s[j] > 0.0) {
      out.v.col(j) = c.transpose() * out.u.col(j) / out.s[j];
    } else {
      replace[static_cast<size_t>(j)] = true;
    }
  }
  orthonormalize_columns(out.v, replace);
  return out;
}

LmoResult spectral_lmo(const Mat& c) {
  require_finite(c, "spectral_lmo");
  if (c.rows() > c.cols()) {
    throw ValidationError("spectral_lmo: expected d <= D");
  }
  if (c.isZero(0.0)) {
    return {truncated_identity(c.rows(), c.cols()), true};
  }
  SvdResult svd = thin_svd(c);
  return {svd.u * svd.v.transpose(), false};
}

Mat stiefel_retract(const Mat& a) {
  SvdResult svd = thin_svd(a);
  const double cutoff = 1e-10 * svd.s[0];
  Eigen::Index rank = 0;
  for (Eigen::Index j = 0; j < svd.s.size(); ++j) {
    if (svd.s[j] > cutoff && svd.s[j] > 0.0) ++rank;
  }
  if (rank < a.rows()) {
    throw ValidationError("stiefel_retract: row rank " + std::to_string(rank) +
                          " is below the required " + std::to_string(a.rows()));
  }
  return svd.u * svd.v.transpose();
}

double op_norm(const Mat& a) {
  if (a.size() == 0) return 0.0;
  Mat g = a.rows() <= a.cols() ? Mat(a * a.transpose()) : Mat(a.transpose() * a);
  g.triangularView<Eigen::StrictlyUpper>() = g.transpose();
  return std::sqrt(std::max(sym_eig(g).values[0], 0.0));
}

double orthonormality_error(const Mat& a) {
  return (a * a.transpose() - Mat::Identity(a.rows(), a.rows()))
      .cwiseAbs()
      .maxCoeff();
}

Mat truncated_identity(Eigen::Index d, Eigen::Index big_d) {
  return Mat::Identity(d, big_d);
}

}  // namespace projann::linalg
