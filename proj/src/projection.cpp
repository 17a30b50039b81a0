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

#include "projann/projection.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <boost/math/tools/minima.hpp>

#include "projann/linalg.hpp"

namespace projann {
namespace {

constexpr double kHullSlack = 1e-6;
// Boost's Brent tolerance is 2^(1 - bits) relative plus a quarter of that
// absolute; 11 bits puts the bracket width near 1e-3 on [0, 1].
constexpr int kBrentBits = 11;

void check_shapes(const Mat& a, const Mat& b, const GramPair& grams) {
  const Eigen::Index big_d = grams.k_x.rows();
  if (a.rows() != b.rows() || a.cols() != big_d || b.cols() != big_d ||
      grams.k_q.rows() != big_d || grams.k_q.cols() != big_d ||
      grams.k_x.cols() != big_d) {
    throw ValidationError("shape mismatch between projection (" +
                          std::to_string(a.rows()) + "x" +
                          std::to_string(a.cols()) + ") and Grams (" +
                          std::to_string(big_d) + "x" +
                          std::to_string(grams.k_x.cols()) + ")");
  }
}

void check_target_dim(Eigen::Index d, Eigen::Index big_d) {
  if (d < 1 || d >= big_d) {
    throw ValidationError("target dimension must satisfy 1 <= d < D, got d=" +
                          std::to_string(d) + " D=" + std::to_string(big_d));
  }
}

Mat leading_rows(const linalg::EigenResult& eig, Eigen::Index d) {
  return eig.vectors.leftCols(d).transpose();
}

void check_psd(const Mat& k, const char* name) {
  const linalg::EigenResult eig = linalg::sym_eig(k);
  const double top = eig.values[0];
  const double bottom = eig.values[eig.values.size() - 1];
  if (bottom < -1e-7 * std::max(std::abs(top), 0.0)) {
    throw ValidationError(std::string(name) +
                          " is not positive semidefinite (smallest "
                          "eigenvalue " + std::to_string(bottom) + ")");
  }
}

// Cached products reused across Frank-Wolfe iterations.
struct LossTerms {
  const GramPair& grams;
  Mat kx_kq;        // Kx Kq
  double constant;  // tr(Kq Kx)

  explicit LossTerms(const GramPair& g)
      : grams(g),
        kx_kq(g.k_x * g.k_q),
        constant(g.k_q.cwiseProduct(g.k_x).sum()) {}

  double loss(const Mat& a, const Mat& b) const {
    const Mat a_kq = a * grams.k_q;
    const Mat b_kx = b * grams.k_x;
    const Mat qa = a_kq * a.transpose();  // A Kq A^T
    const Mat xb = b_kx * b.transpose();  // B Kx B^T
    return qa.cwiseProduct(xb).sum() + constant -
           2.0 * a_kq.cwiseProduct(b_kx).sum();
  }

  Mat grad_a(const Mat& a, const Mat& b) const {
    const Mat b_kx = b * grams.k_x;
    return 2.0 * (b_kx * b.transpose()) * (a * grams.k_q) - 2.0 * b * kx_kq;
  }

  Mat grad_b(const Mat& a, const Mat& b) const {
    const Mat a_kq = a * grams.k_q;
    return 2.0 * (a_kq * a.transpose()) * (b * grams.k_x) -
           2.0 * a * kx_kq.transpose();
  }
};

}  // namespace

std::string_view to_string(Termination t) {
  return t == Termination::tolerance ? "tolerance" : "max_iters";
}

std::vector<Eigen::Index> stride_sample(Eigen::Index rows, size_t limit) {
  std::vector<Eigen::Index> picked;
  if (rows <= 0 || limit == 0) return picked;
  const auto cap = static_cast<Eigen::Index>(limit);
  const Eigen::Index stride = (rows + cap - 1) / cap;
  for (Eigen::Index i = 0; i < rows; i += stride) picked.push_back(i);
  return picked;
}

GramPair compute_grams(const FloatMatrix& data, const FloatMatrix& queries,
                       const GramOptions& options) {
  const Eigen::Index big_d = data.cols();
  if (queries.cols() != big_d) {
    throw ValidationError("compute_grams: query dimension " +
                          std::to_string(queries.cols()) +
                          " != data dimension " + std::to_string(big_d));
  }
  auto gather = [](const FloatMatrix& src, const std::vector<Eigen::Index>& ids) {
    FloatMatrix out(static_cast<Eigen::Index>(ids.size()), src.cols());
    for (size_t i = 0; i < ids.size(); ++i) {
      out.row(static_cast<Eigen::Index>(i)) = src.row(ids[i]);
    }
    return out;
  };
  const FloatMatrix xs = gather(data, stride_sample(data.rows(), options.max_database));
  const FloatMatrix qs = gather(queries, stride_sample(queries.rows(), options.max_queries));
  if (xs.rows() < big_d || qs.rows() < big_d) {
    throw ValidationError("compute_grams: need at least D=" +
                          std::to_string(big_d) +
                          " database and query vectors, got " +
                          std::to_string(xs.rows()) + " and " +
                          std::to_string(qs.rows()));
  }

  GramPair grams;
  grams.n = static_cast<size_t>(xs.rows());
  grams.m = static_cast<size_t>(qs.rows());
  grams.k_x = linalg::accumulate_gram(xs, options.workers);
  if (options.normalize_queries) {
    std::vector<double> weights(grams.m);
    for (Eigen::Index j = 0; j < qs.rows(); ++j) {
      const double sq = qs.row(j).cast<double>().squaredNorm();
      weights[static_cast<size_t>(j)] =
          sq > 0.0 ? 1.0 / (static_cast<double>(grams.m) * sq) : 0.0;
    }
    grams.k_q = linalg::accumulate_gram(qs, weights, options.workers);
  } else {
    grams.k_q = linalg::accumulate_gram(qs, options.workers);
  }
  return grams;
}

ProjectionPair ProjectionPair::same(Mat m, bool orthonormal) {
  ProjectionPair p;
  p.a = m;
  p.b = std::move(m);
  p.orthonormal = orthonormal;
  return p;
}

ProjectionPair ProjectionPair::identity(Eigen::Index dim) {
  return same(Mat::Identity(dim, dim), true);
}

void ProjectionPair::validate() const {
  if (a.rows() < 1 || a.rows() > a.cols()) {
    throw ValidationError("projection: need 1 <= d <= D, got d=" +
                          std::to_string(a.rows()) +
                          " D=" + std::to_string(a.cols()));
  }
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ValidationError("projection: a and b shapes differ");
  }
  if (!a.allFinite() || !b.allFinite()) {
    throw ValidationError("projection: non-finite entries");
  }
  for (const Mat* m : {&a, &b}) {
    if (orthonormal) {
      const double err = linalg::orthonormality_error(*m);
      if (err > 1e-6) {
        throw ValidationError("projection: rows not orthonormal (error " +
                              std::to_string(err) + ")");
      }
    } else if (linalg::op_norm(*m) > 1.0 + kHullSlack) {
      throw ValidationError("projection: spectral norm exceeds 1");
    }
  }
}

void validate_grams(const GramPair& grams) {
  const Eigen::Index big_d = grams.k_x.rows();
  if (big_d < 1 || grams.k_x.cols() != big_d || grams.k_q.rows() != big_d ||
      grams.k_q.cols() != big_d) {
    throw ValidationError("Gram matrices must be square and of equal size");
  }
  if (grams.m == 0 || grams.n == 0) {
    throw ValidationError("Gram sample counts must be positive (m=" +
                          std::to_string(grams.m) +
                          ", n=" + std::to_string(grams.n) + ")");
  }
  check_psd(grams.k_q, "k_q");
  check_psd(grams.k_x, "k_x");
}

ProjectionPair train_id(const Mat& k_x, Eigen::Index d) {
  check_target_dim(d, k_x.rows());
  check_psd(k_x, "k_x");
  return ProjectionPair::same(leading_rows(linalg::sym_eig(k_x), d));
}

double reconstruction_loss(const Mat& m, const Mat& k_x) {
  return k_x.trace() - (m * k_x * m.transpose()).trace();
}

double ood_loss(const Mat& a, const Mat& b, const GramPair& grams) {
  check_shapes(a, b, grams);
  return LossTerms(grams).loss(a, b);
}

double ood_loss(const ProjectionPair& pair, const GramPair& grams) {
  return ood_loss(pair.a, pair.b, grams);
}

std::pair<Mat, Mat> ood_gradients(const Mat& a, const Mat& b,
                                  const GramPair& grams) {
  check_shapes(a, b, grams);
  LossTerms terms(grams);
  return {terms.grad_a(a, b), terms.grad_b(a, b)};
}

std::pair<Mat, Mat> ood_gradients(const ProjectionPair& pair,
                                  const GramPair& grams) {
  return ood_gradients(pair.a, pair.b, grams);
}

FwGap fw_gap(const ProjectionPair& pair, const GramPair& grams) {
  auto [ga, gb] = ood_gradients(pair, grams);
  const Mat sa = linalg::spectral_lmo(-ga).s;
  const Mat sb = linalg::spectral_lmo(-gb).s;
  return {(-ga).cwiseProduct(sa - pair.a).sum(),
          (-gb).cwiseProduct(sb - pair.b).sum()};
}

FwResult train_ood_fw(const GramPair& grams, Eigen::Index d,
                      const FwConfig& config) {
  check_target_dim(d, grams.k_x.rows());
  ProjectionPair start;
  start.a = Mat::Zero(d, grams.k_x.rows());
  start.b = start.a;
  start.orthonormal = false;
  return train_ood_fw(grams, start, config);
}

FwResult train_ood_fw(const GramPair& grams, const ProjectionPair& start,
                      const FwConfig& config) {
  if (!(config.alpha > 0.0 && config.alpha < 1.0)) {
    throw ValidationError("FwConfig: alpha must lie in (0, 1)");
  }
  if (config.max_iters < 1) throw ValidationError("FwConfig: max_iters < 1");
  if (!(config.rel_tol > 0.0)) throw ValidationError("FwConfig: rel_tol <= 0");
  check_target_dim(start.a.rows(), grams.k_x.rows());
  check_shapes(start.a, start.b, grams);
  validate_grams(grams);

  const LossTerms terms(grams);
  Mat a = start.a;
  Mat b = start.b;
  FwResult result;
  ConvergenceReport& report = result.report;
  report.losses.push_back(terms.loss(a, b));

  for (int t = 0; t < config.max_iters; ++t) {
    const double gamma = 1.0 / std::pow(t + 1.0, config.alpha);

    const Mat neg_ga = -terms.grad_a(a, b);
    const Mat sa = linalg::spectral_lmo(neg_ga).s;
    report.gaps_a.push_back(neg_ga.cwiseProduct(sa - a).sum());
    a = (1.0 - gamma) * a + gamma * sa;

    const Mat neg_gb = -terms.grad_b(a, b);
    const Mat sb = linalg::spectral_lmo(neg_gb).s;
    report.gaps_b.push_back(neg_gb.cwiseProduct(sb - b).sum());
    b = (1.0 - gamma) * b + gamma * sb;

    report.steps.push_back(gamma);
    report.losses.push_back(terms.loss(a, b));
    report.iterations_run = t + 1;

    const double prev = report.losses[static_cast<size_t>(t)];
    const double cur = report.losses.back();
    if (std::abs(cur - prev) <= config.rel_tol * std::abs(prev)) {
      report.termination = Termination::tolerance;
      break;
    }
  }

  result.pair.orthonormal = false;
  if (config.retract_output) {
    report.loss_before_retraction = report.losses.back();
    a = linalg::stiefel_retract(a);
    b = linalg::stiefel_retract(b);
    report.loss_after_retraction = terms.loss(a, b);
    result.pair.orthonormal = true;
  }
  result.pair.a = std::move(a);
  result.pair.b = std::move(b);
  return result;
}

Mat eigsearch_projection(const GramPair& grams, Eigen::Index d, double beta) {
  const Mat k_beta = (1.0 - beta) / static_cast<double>(grams.m) * grams.k_q +
                     beta / static_cast<double>(grams.n) * grams.k_x;
  return leading_rows(linalg::sym_eig(k_beta), d);
}

double eigsearch_loss(const Mat& p, const GramPair& grams) {
  const Mat p_kq = p * grams.k_q / static_cast<double>(grams.m);
  const Mat p_kx = p * grams.k_x / static_cast<double>(grams.n);
  const Mat qp = p_kq * p.transpose();
  const Mat xp = p_kx * p.transpose();
  return qp.cwiseProduct(xp).sum() - 2.0 * p_kq.cwiseProduct(p_kx).sum();
}

EsResult train_ood_es(const GramPair& grams, Eigen::Index d) {
  if (grams.m == 0 || grams.n == 0) {
    throw ValidationError("train_ood_es: sample counts m and n must be positive");
  }
  check_target_dim(d, grams.k_x.rows());
  validate_grams(grams);

  auto objective = [&](double beta) {
    return eigsearch_loss(eigsearch_projection(grams, d, beta), grams);
  };
  boost::uintmax_t max_iter = 100;
  const auto [brent_beta, brent_loss] =
      boost::math::tools::brent_find_minima(objective, 0.0, 1.0, kBrentBits,
                                            max_iter);

  // beta = 1 (plain PCA) goes first so it wins ties.
  double best_beta = 1.0;
  double best = objective(1.0);
  for (const auto& [beta, value] :
       {std::pair{0.0, objective(0.0)}, std::pair{0.5, objective(0.5)},
        std::pair{brent_beta, brent_loss}}) {
    if (value < best) {
      best = value;
      best_beta = beta;
    }
  }

  EsResult out;
  out.beta = best_beta;
  out.search_loss = best;
  out.pair = ProjectionPair::same(eigsearch_projection(grams, d, best_beta));
  out.loss = ood_loss(out.pair, grams);
  return out;
}

}  // namespace projann
